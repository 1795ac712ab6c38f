//! Vocabularies and the augmented graph: original triples, one `has_type` edge
//! per training (entity, type) pair, and an inverted partner for every edge.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Name of the synthetic relation linking an entity to one of its known types.
pub const HAS_TYPE: &str = "has_type";
/// `has_type` always occupies relation index 0.
pub const HAS_TYPE_ID: u32 = 0;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RawTriple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl RawTriple {
    pub fn new(head: &str, relation: &str, tail: &str) -> Self {
        RawTriple { head: head.to_string(), relation: relation.to_string(), tail: tail.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RawPair {
    pub entity: String,
    pub ty: String,
}

impl RawPair {
    pub fn new(entity: &str, ty: &str) -> Self {
        RawPair { entity: entity.to_string(), ty: ty.to_string() }
    }
}

/// Dense bijection between names and `0..len` ids, in first-insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    ids: BTreeMap<String, u32>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds an interner from an ordered name table; duplicate names are rejected.
    pub fn from_names(kind: &'static str, names: Vec<String>) -> Result<Self> {
        let mut ids = BTreeMap::new();
        for (i, name) in names.iter().enumerate() {
            if ids.insert(name.clone(), i as u32).is_some() {
                return Err(Error::InvalidConfig(alloc::format!("duplicate {kind} name {name:?}")));
            }
        }
        Ok(Interner { names, ids })
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    pub entities: Interner,
    /// Index 0 is always [`HAS_TYPE`].
    pub relations: Interner,
    pub types: Interner,
}

impl Vocab {
    fn empty() -> Self {
        let mut relations = Interner::new();
        relations.intern(HAS_TYPE);
        Vocab { entities: Interner::new(), relations, types: Interner::new() }
    }

    /// Reassembles a vocabulary from stored name tables.
    pub fn from_tables(entities: Vec<String>, relations: Vec<String>, types: Vec<String>) -> Result<Self> {
        if relations.first().map(String::as_str) != Some(HAS_TYPE) {
            return Err(Error::InvalidConfig("relation table must start with has_type".into()));
        }
        if types.is_empty() {
            return Err(Error::NoTypes);
        }
        Ok(Vocab {
            entities: Interner::from_names("entity", entities)?,
            relations: Interner::from_names("relation", relations)?,
            types: Interner::from_names("type", types)?,
        })
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn entity_id(&self, name: &str) -> Result<u32> {
        self.entities.get(name).ok_or_else(|| unknown("entity", name))
    }

    pub fn relation_id(&self, name: &str) -> Result<u32> {
        self.relations.get(name).ok_or_else(|| unknown("relation", name))
    }

    pub fn type_id(&self, name: &str) -> Result<u32> {
        self.types.get(name).ok_or_else(|| unknown("type", name))
    }

    pub fn resolve_triple(&self, t: &RawTriple) -> Result<(u32, u32, u32)> {
        Ok((self.entity_id(&t.head)?, self.relation_id(&t.relation)?, self.entity_id(&t.tail)?))
    }

    pub fn resolve_pair(&self, p: &RawPair) -> Result<(u32, u32)> {
        Ok((self.entity_id(&p.entity)?, self.type_id(&p.ty)?))
    }

    /// Renders a neighbor as `(relation, target)`, inverse edges as `(inverse of relation, target)`.
    pub fn render_neighbor(&self, nb: &Neighbor) -> String {
        let rel = self.relations.name(nb.relation).unwrap_or("?");
        let target = match nb.target {
            NodeRef::Entity(e) => self.entities.name(e).unwrap_or("?"),
            NodeRef::Type(t) => self.types.name(t).unwrap_or("?"),
        };
        if nb.inverted {
            alloc::format!("(inverse of {rel}, {target})")
        } else {
            alloc::format!("({rel}, {target})")
        }
    }
}

fn unknown(kind: &'static str, name: &str) -> Error {
    Error::UnknownName { kind, name: name.to_string() }
}

/// Assigns ids in first-appearance order: per triple head, relation, tail; per pair entity, type.
pub fn build_vocab(triples: &[RawTriple], pairs: &[RawPair]) -> Result<Vocab> {
    if triples.is_empty() && pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut vocab = Vocab::empty();
    for t in triples {
        vocab.entities.intern(&t.head);
        vocab.relations.intern(&t.relation);
        vocab.entities.intern(&t.tail);
    }
    for p in pairs {
        vocab.entities.intern(&p.entity);
        vocab.types.intern(&p.ty);
    }
    if vocab.types.is_empty() {
        return Err(Error::NoTypes);
    }
    Ok(vocab)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRef {
    Entity(u32),
    Type(u32),
}

/// One outgoing edge `(relation, target)` of a node in the augmented graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Neighbor {
    pub relation: u32,
    /// True for the reverse edge `r⁻¹`; its embedding is `-r`.
    pub inverted: bool,
    pub target: NodeRef,
}

impl Neighbor {
    pub fn forward(relation: u32, target: NodeRef) -> Self {
        Neighbor { relation, inverted: false, target }
    }

    pub fn inverse(relation: u32, target: NodeRef) -> Self {
        Neighbor { relation, inverted: true, target }
    }

    /// The `(relation, type)` edge added for a known type.
    pub fn is_type_edge(&self) -> bool {
        self.relation == HAS_TYPE_ID && !self.inverted
    }

    /// The partner edge seen from `target`, pointing back at `origin`.
    pub fn reversed(&self, origin: NodeRef) -> Self {
        Neighbor { relation: self.relation, inverted: !self.inverted, target: origin }
    }
}

/// Immutable CSR adjacency over entity nodes and type nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedGraph {
    entity_offsets: Vec<usize>,
    entity_edges: Vec<Neighbor>,
    type_offsets: Vec<usize>,
    type_edges: Vec<Neighbor>,
    pub num_edges_original: usize,
    pub num_type_edges: usize,
    pub duplicate_triples: usize,
    pub duplicate_pairs: usize,
}

/// Resolves names and builds the graph. Only training pairs may be passed.
pub fn build_graph(
    vocab: &Vocab,
    triples: &[RawTriple],
    train_pairs: &[RawPair],
    include_type_edges: bool,
) -> Result<AugmentedGraph> {
    let triples = triples.iter().map(|t| vocab.resolve_triple(t)).collect::<Result<Vec<_>>>()?;
    let pairs = train_pairs.iter().map(|p| vocab.resolve_pair(p)).collect::<Result<Vec<_>>>()?;
    AugmentedGraph::from_ids(vocab.num_entities(), vocab.num_types(), &triples, &pairs, include_type_edges)
}

impl AugmentedGraph {
    pub fn from_ids(
        num_entities: usize,
        num_types: usize,
        triples: &[(u32, u32, u32)],
        pairs: &[(u32, u32)],
        include_type_edges: bool,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut unique_triples = Vec::with_capacity(triples.len());
        for &(s, r, o) in triples {
            check_index("entity", s, num_entities)?;
            check_index("entity", o, num_entities)?;
            if seen.insert((s, r, o)) {
                unique_triples.push((s, r, o));
            }
        }
        let duplicate_triples = triples.len() - unique_triples.len();

        let mut seen = BTreeSet::new();
        let mut unique_pairs = Vec::with_capacity(pairs.len());
        for &(e, t) in pairs {
            check_index("entity", e, num_entities)?;
            check_index("type", t, num_types)?;
            if seen.insert((e, t)) {
                unique_pairs.push((e, t));
            }
        }
        let duplicate_pairs = pairs.len() - unique_pairs.len();
        if !include_type_edges {
            unique_pairs.clear();
        }

        let mut entity_deg = vec![0usize; num_entities];
        let mut type_deg = vec![0usize; num_types];
        for &(s, _, o) in &unique_triples {
            entity_deg[s as usize] += 1;
            entity_deg[o as usize] += 1;
        }
        for &(e, t) in &unique_pairs {
            entity_deg[e as usize] += 1;
            type_deg[t as usize] += 1;
        }
        let entity_offsets = prefix_sums(&entity_deg);
        let type_offsets = prefix_sums(&type_deg);
        let placeholder = Neighbor::forward(0, NodeRef::Entity(0));
        let mut entity_edges = vec![placeholder; entity_offsets[num_entities]];
        let mut type_edges = vec![placeholder; type_offsets[num_types]];
        let mut entity_cursor = entity_offsets[..num_entities].to_vec();
        let mut type_cursor = type_offsets[..num_types].to_vec();

        let mut push_entity = |node: u32, nb: Neighbor| {
            let slot = &mut entity_cursor[node as usize];
            entity_edges[*slot] = nb;
            *slot += 1;
        };
        for &(s, r, o) in &unique_triples {
            push_entity(s, Neighbor::forward(r, NodeRef::Entity(o)));
            push_entity(o, Neighbor::inverse(r, NodeRef::Entity(s)));
        }
        for &(e, t) in &unique_pairs {
            push_entity(e, Neighbor::forward(HAS_TYPE_ID, NodeRef::Type(t)));
            let slot = &mut type_cursor[t as usize];
            type_edges[*slot] = Neighbor::inverse(HAS_TYPE_ID, NodeRef::Entity(e));
            *slot += 1;
        }

        Ok(AugmentedGraph {
            entity_offsets,
            entity_edges,
            type_offsets,
            type_edges,
            num_edges_original: unique_triples.len(),
            num_type_edges: unique_pairs.len(),
            duplicate_triples,
            duplicate_pairs,
        })
    }

    pub fn num_entities(&self) -> usize {
        self.entity_offsets.len() - 1
    }

    pub fn num_types(&self) -> usize {
        self.type_offsets.len() - 1
    }

    /// Outgoing neighbors of an entity, in input order.
    pub fn neighbors(&self, entity: u32) -> Result<&[Neighbor]> {
        check_index("entity", entity, self.num_entities())?;
        let e = entity as usize;
        Ok(&self.entity_edges[self.entity_offsets[e]..self.entity_offsets[e + 1]])
    }

    /// Stored inverse `has_type` edges of a type node. Never traversed by scoring.
    pub fn type_neighbors(&self, ty: u32) -> Result<&[Neighbor]> {
        check_index("type", ty, self.num_types())?;
        let t = ty as usize;
        Ok(&self.type_edges[self.type_offsets[t]..self.type_offsets[t + 1]])
    }

    pub fn degree(&self, entity: u32) -> usize {
        let e = entity as usize;
        self.entity_offsets[e + 1] - self.entity_offsets[e]
    }

    pub fn num_directed_edges(&self) -> usize {
        self.entity_edges.len() + self.type_edges.len()
    }
}

fn prefix_sums(deg: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(deg.len() + 1);
    let mut acc = 0;
    out.push(0);
    for d in deg {
        acc += d;
        out.push(acc);
    }
    out
}

fn check_index(kind: &'static str, index: u32, len: usize) -> Result<()> {
    if (index as usize) < len {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { kind, index: index as usize, len })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(h: &str, r: &str, o: &str) -> RawTriple {
        RawTriple::new(h, r, o)
    }

    #[test]
    fn minimal_corpus_vocab() {
        let v = build_vocab(&[t("a", "r", "b")], &[RawPair::new("a", "t1")]).unwrap();
        assert_eq!(v.num_entities(), 2);
        assert_eq!(v.num_relations(), 2);
        assert_eq!(v.num_types(), 1);
        assert_eq!(v.relation_id(HAS_TYPE).unwrap(), HAS_TYPE_ID);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert_eq!(build_vocab(&[], &[]), Err(Error::EmptyCorpus));
        assert_eq!(build_vocab(&[t("a", "r", "b")], &[]), Err(Error::NoTypes));
    }

    #[test]
    fn first_appearance_order() {
        let v = build_vocab(&[t("x", "r2", "y"), t("y", "r1", "z")], &[RawPair::new("w", "T")]).unwrap();
        assert_eq!(v.entities.names(), &["x", "y", "z", "w"]);
        assert_eq!(v.relations.names(), &[HAS_TYPE, "r2", "r1"]);
    }

    #[test]
    fn single_edge_and_inverse() {
        let triples = [t("s", "r", "o")];
        let pairs = [RawPair::new("s", "t1")];
        let v = build_vocab(&triples, &pairs).unwrap();
        let g = build_graph(&v, &triples, &pairs, true).unwrap();
        assert_eq!(g.num_directed_edges(), 4);
        let (s, r, o) = (v.entity_id("s").unwrap(), v.relation_id("r").unwrap(), v.entity_id("o").unwrap());
        assert_eq!(
            g.neighbors(s).unwrap(),
            &[Neighbor::forward(r, NodeRef::Entity(o)), Neighbor::forward(HAS_TYPE_ID, NodeRef::Type(0))]
        );
        assert_eq!(g.neighbors(o).unwrap(), &[Neighbor::inverse(r, NodeRef::Entity(s))]);
        assert_eq!(g.type_neighbors(0).unwrap(), &[Neighbor::inverse(HAS_TYPE_ID, NodeRef::Entity(s))]);

        let g = build_graph(&v, &triples, &[], true).unwrap();
        assert_eq!(g.neighbors(s).unwrap(), &[Neighbor::forward(r, NodeRef::Entity(o))]);
    }

    #[test]
    fn isolated_node_and_bad_index() {
        let pairs = [RawPair::new("lonely", "t")];
        let v = build_vocab(&[t("a", "r", "b")], &pairs).unwrap();
        let g = build_graph(&v, &[t("a", "r", "b")], &pairs, false).unwrap();
        assert!(g.neighbors(v.entity_id("lonely").unwrap()).unwrap().is_empty());
        assert!(matches!(g.neighbors(99), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn unknown_name_reported() {
        let v = build_vocab(&[t("a", "r", "b")], &[RawPair::new("a", "t")]).unwrap();
        let err = build_graph(&v, &[t("a", "r", "zzz")], &[], true).unwrap_err();
        assert_eq!(err, Error::UnknownName { kind: "entity", name: "zzz".into() });
    }

    #[test]
    fn type_edges_can_be_disabled() {
        let triples = [t("a", "r", "b"), t("b", "r", "c")];
        let pairs = [RawPair::new("a", "t"), RawPair::new("c", "u")];
        let v = build_vocab(&triples, &pairs).unwrap();
        let g = build_graph(&v, &triples, &pairs, false).unwrap();
        assert_eq!(g.num_directed_edges(), 4);
        for e in 0..v.num_entities() as u32 {
            assert!(g.neighbors(e).unwrap().iter().all(|nb| !nb.is_type_edge()));
        }
    }

    #[test]
    fn duplicates_are_dropped_and_counted() {
        let triples = [t("a", "r", "b"), t("a", "r", "b")];
        let pairs = [RawPair::new("a", "t"), RawPair::new("a", "t")];
        let v = build_vocab(&triples, &pairs).unwrap();
        let g = build_graph(&v, &triples, &pairs, true).unwrap();
        assert_eq!(g.duplicate_triples, 1);
        assert_eq!(g.duplicate_pairs, 1);
        assert_eq!(g.num_directed_edges(), 4);
    }

    #[test]
    fn reversing_twice_is_identity() {
        let nb = Neighbor::forward(3, NodeRef::Entity(7));
        let back = nb.reversed(NodeRef::Entity(1));
        assert_eq!(back, Neighbor::inverse(3, NodeRef::Entity(1)));
        assert_eq!(back.reversed(NodeRef::Entity(7)), nb);
    }
}
