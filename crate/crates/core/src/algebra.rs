//! Spans of products of color matrices.
//!
//! Matrices are stored as coordinate vectors in a [`CoordinateFrame`]. The
//! full frame has one coordinate per vertex pair. A coarser frame groups
//! pairs into classes of a coherent partition that is finer than the
//! generator colors; every product of generators is then constant on those
//! classes, so one coordinate per class is exact and products only need to
//! be evaluated at one representative pair per class.

use std::collections::HashMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::color::ColorId;
use crate::coloring::ColoredCompleteGraph;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::partition::PairPartition;

fn offsets_of(blocks: &[usize]) -> Vec<usize> {
    let mut off = Vec::with_capacity(blocks.len() + 1);
    let mut acc = 0;
    off.push(0);
    for n in blocks {
        acc += n * n;
        off.push(acc);
    }
    off
}

/// The 0/1 indicator matrices of the colors of one or more colorings.
/// With several colorings the matrices are block diagonal.
#[derive(Debug, Clone)]
pub struct ColorMatrices {
    blocks: Vec<usize>,
    offsets: Vec<usize>,
    colors: Vec<ColorId>,
    index: Vec<u32>,
}

impl ColorMatrices {
    pub fn from_colorings(cs: &[ColoredCompleteGraph]) -> Self {
        let blocks: Vec<usize> = cs.iter().map(|c| c.n()).collect();
        let mut colors = Vec::new();
        let mut seen: HashMap<ColorId, u32> = HashMap::new();
        let mut index = Vec::new();
        for c in cs {
            for &x in c.colors() {
                let i = *seen.entry(x).or_insert_with(|| {
                    colors.push(x);
                    colors.len() as u32 - 1
                });
                index.push(i);
            }
        }
        ColorMatrices {
            offsets: offsets_of(&blocks),
            blocks,
            colors,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn colors(&self) -> &[ColorId] {
        &self.colors
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    /// Color index of pair `(u, v)` in block `b`.
    #[inline]
    pub fn color_index(&self, b: usize, u: usize, v: usize) -> usize {
        self.index[self.offsets[b] + u * self.blocks[b] + v] as usize
    }

    /// Dense `N x N` indicator of color `i`, `N` the total vertex count.
    pub fn dense(&self, i: usize) -> Vec<Vec<u8>> {
        let total: usize = self.blocks.iter().sum();
        let mut m = vec![vec![0u8; total]; total];
        let mut base = 0;
        for (b, &n) in self.blocks.iter().enumerate() {
            for u in 0..n {
                for v in 0..n {
                    if self.color_index(b, u, v) == i {
                        m[base + u][base + v] = 1;
                    }
                }
            }
            base += n;
        }
        m
    }
}

pub fn color_matrices(c: &ColoredCompleteGraph) -> ColorMatrices {
    ColorMatrices::from_colorings(std::slice::from_ref(c))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordinateFrame {
    blocks: Vec<usize>,
    offsets: Vec<usize>,
    coord: Vec<u32>,
    reps: Vec<(usize, usize, usize)>,
}

impl CoordinateFrame {
    /// One coordinate per pair.
    pub fn full(blocks: &[usize]) -> Self {
        let mut reps = Vec::new();
        for (b, &n) in blocks.iter().enumerate() {
            for u in 0..n {
                for v in 0..n {
                    reps.push((b, u, v));
                }
            }
        }
        CoordinateFrame {
            blocks: blocks.to_vec(),
            offsets: offsets_of(blocks),
            coord: (0..reps.len() as u32).collect(),
            reps,
        }
    }

    /// One coordinate per class. The partition must be coherent and finer
    /// than every coloring whose matrices are multiplied in this frame; the
    /// stable Weisfeiler-Leman partition qualifies.
    pub fn from_partition(p: &PairPartition) -> Self {
        let blocks = p.blocks().to_vec();
        let mut reps = vec![None; p.num_classes()];
        let mut i = 0;
        for (b, &n) in blocks.iter().enumerate() {
            for u in 0..n {
                for v in 0..n {
                    let slot = &mut reps[p.class_of()[i] as usize];
                    if slot.is_none() {
                        *slot = Some((b, u, v));
                    }
                    i += 1;
                }
            }
        }
        CoordinateFrame {
            offsets: offsets_of(&blocks),
            blocks,
            coord: p.class_of().to_vec(),
            reps: reps
                .into_iter()
                .map(|r| r.expect("class is inhabited"))
                .collect(),
        }
    }

    pub fn num_coords(&self) -> usize {
        self.reps.len()
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    #[inline]
    pub fn coord(&self, b: usize, u: usize, v: usize) -> usize {
        self.coord[self.offsets[b] + u * self.blocks[b] + v] as usize
    }

    /// Fails unless every coordinate class is monochromatic in `gens`.
    pub fn check_compatible(&self, gens: &ColorMatrices) -> Result<()> {
        if gens.blocks != self.blocks {
            return Err(Error::UniverseMismatch);
        }
        for (b, &n) in self.blocks.iter().enumerate() {
            for u in 0..n {
                for v in 0..n {
                    let (rb, ru, rv) = self.reps[self.coord(b, u, v)];
                    if gens.color_index(b, u, v) != gens.color_index(rb, ru, rv) {
                        return Err(Error::Precondition(
                            "coordinate frame is coarser than the generator colors".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// `b * sum_c weights[c] * M_c`, evaluated at every coordinate.
    fn right_multiply<F: Field>(
        &self,
        field: &F,
        gens: &ColorMatrices,
        b: &[F::Elem],
        weights: &[F::Elem],
    ) -> Vec<F::Elem> {
        self.reps
            .iter()
            .map(|&(g, u, v)| {
                let mut acc = field.zero();
                for w in 0..self.blocks[g] {
                    let x = &b[self.coord(g, u, w)];
                    if !field.is_zero(x) {
                        field.mul_add(&mut acc, x, &weights[gens.color_index(g, w, v)]);
                    }
                }
                acc
            })
            .collect()
    }

    /// `b * M_c` for every generator `c`.
    fn right_multiply_each<F: Field>(
        &self,
        field: &F,
        gens: &ColorMatrices,
        b: &[F::Elem],
    ) -> Vec<Vec<F::Elem>> {
        let mut out = vec![vec![field.zero(); self.num_coords()]; gens.len()];
        for (x, &(g, u, v)) in self.reps.iter().enumerate() {
            for w in 0..self.blocks[g] {
                let y = &b[self.coord(g, u, w)];
                if !field.is_zero(y) {
                    let slot = &mut out[gens.color_index(g, w, v)][x];
                    *slot = field.add(slot, y);
                }
            }
        }
        out
    }
}

/// A subspace of frame-coordinate vectors kept in reduced row echelon form.
/// Pivots are the first nonzero coordinate and rows are ordered by pivot.
#[derive(Debug, Clone)]
pub struct MatrixSpanBasis<F: Field> {
    field: F,
    frame: Arc<CoordinateFrame>,
    rows: Vec<Vec<F::Elem>>,
    pivots: Vec<usize>,
}

impl<F: Field> MatrixSpanBasis<F> {
    pub fn new(field: F, frame: Arc<CoordinateFrame>) -> Self {
        MatrixSpanBasis {
            field,
            frame,
            rows: Vec::new(),
            pivots: Vec::new(),
        }
    }

    /// Span of the generator matrices, i.e. of all products of length one.
    pub fn from_generators(
        field: F,
        frame: Arc<CoordinateFrame>,
        gens: &ColorMatrices,
    ) -> Result<Self> {
        frame.check_compatible(gens)?;
        let mut basis = Self::new(field, frame);
        let nc = basis.frame.num_coords();
        let mut vecs = vec![vec![basis.field.zero(); nc]; gens.len()];
        for (x, &(g, u, v)) in basis.frame.reps.iter().enumerate() {
            vecs[gens.color_index(g, u, v)][x] = basis.field.one();
        }
        for v in vecs {
            basis.insert(v);
        }
        Ok(basis)
    }

    pub fn field(&self) -> &F {
        &self.field
    }

    pub fn frame(&self) -> &Arc<CoordinateFrame> {
        &self.frame
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<F::Elem>] {
        &self.rows
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    fn reduce_against(&self, v: &mut [F::Elem], from: usize) {
        for (row, &p) in self.rows[from..].iter().zip(&self.pivots[from..]) {
            if !self.field.is_zero(&v[p]) {
                let f = v[p].clone();
                self.field.sub_scaled(v, &f, row);
            }
        }
    }

    pub fn reduce(&self, v: &mut [F::Elem]) {
        self.reduce_against(v, 0);
    }

    pub fn contains(&self, v: &[F::Elem]) -> bool {
        let mut w = v.to_vec();
        self.reduce(&mut w);
        w.iter().all(|x| self.field.is_zero(x))
    }

    /// Adds `v` to the span. Returns the normalized reduced vector when the
    /// rank grew.
    pub fn insert(&mut self, mut v: Vec<F::Elem>) -> Option<Vec<F::Elem>> {
        self.reduce(&mut v);
        self.insert_reduced(v)
    }

    fn insert_reduced(&mut self, mut v: Vec<F::Elem>) -> Option<Vec<F::Elem>> {
        let q = v.iter().position(|x| !self.field.is_zero(x))?;
        let inv = self.field.inv(&v[q]);
        self.field.scale(&mut v, &inv);
        for row in self.rows.iter_mut() {
            if !self.field.is_zero(&row[q]) {
                let f = row[q].clone();
                self.field.sub_scaled(row, &f, &v);
            }
        }
        let at = self.pivots.partition_point(|&p| p < q);
        self.pivots.insert(at, q);
        self.rows.insert(at, v.clone());
        Some(v)
    }

    /// Inserts a batch. Candidates are first reduced in parallel against the
    /// current rows; the cheap sequential pass only has to account for rows
    /// added within the batch.
    pub fn insert_batch(&mut self, batch: Vec<Vec<F::Elem>>) -> Vec<Vec<F::Elem>> {
        let reduced: Vec<Vec<F::Elem>> = batch
            .into_par_iter()
            .map(|mut v| {
                self.reduce(&mut v);
                v
            })
            .collect();
        let mut added: Vec<Vec<F::Elem>> = Vec::new();
        for mut v in reduced {
            // rows added in this batch are themselves reduced against the
            // old rows, so only they can reintroduce old pivots; reducing
            // against all rows keeps this simple and exact
            if !added.is_empty() {
                self.reduce(&mut v);
            }
            if let Some(r) = self.insert_reduced(v) {
                added.push(r);
            }
        }
        added
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthStrategy {
    /// Multiply every new vector by every generator.
    Exhaustive,
    /// Multiply new vectors by random combinations of the generators until a
    /// whole round adds nothing. Over a field of size q a round misses a
    /// missing direction with probability at most 1/q.
    Randomized { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrowthOutcome {
    /// `dims[l - 1]` is the dimension of the span of products of length at
    /// most `l`.
    pub dims: Vec<usize>,
    /// First product length whose increment added no rank, when reached
    /// within the length limit.
    pub stabilized_at: Option<usize>,
}

/// Extends a basis spanning the products of length at most one to the span
/// of products of length at most `max_length`.
pub fn grow_products<F: Field>(
    mut basis: MatrixSpanBasis<F>,
    gens: &ColorMatrices,
    max_length: usize,
    strategy: GrowthStrategy,
) -> (MatrixSpanBasis<F>, GrowthOutcome) {
    let mut rng = match strategy {
        GrowthStrategy::Randomized { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        GrowthStrategy::Exhaustive => None,
    };
    let mut frontier = basis.rows.clone();
    let mut dims = vec![basis.rank()];
    let mut len = 1;
    while len < max_length {
        let new = match rng.as_mut() {
            None => {
                let products: Vec<Vec<F::Elem>> = frontier
                    .par_iter()
                    .flat_map_iter(|b| basis.frame.right_multiply_each(&basis.field, gens, b))
                    .collect();
                basis.insert_batch(products)
            }
            Some(rng) => {
                let mut new = Vec::new();
                loop {
                    let weights: Vec<F::Elem> =
                        (0..gens.len()).map(|_| basis.field.random(rng)).collect();
                    let products: Vec<Vec<F::Elem>> = frontier
                        .par_iter()
                        .map(|b| basis.frame.right_multiply(&basis.field, gens, b, &weights))
                        .collect();
                    let added = basis.insert_batch(products);
                    if added.is_empty() {
                        break;
                    }
                    new.extend(added);
                }
                new
            }
        };
        len += 1;
        dims.push(basis.rank());
        if new.is_empty() {
            return (
                basis,
                GrowthOutcome {
                    dims,
                    stabilized_at: Some(len),
                },
            );
        }
        frontier = new;
    }
    (
        basis,
        GrowthOutcome {
            dims,
            stabilized_at: None,
        },
    )
}

/// Pairs are equivalent when every matrix in the span takes the same value
/// on them.
pub fn partition_from_span<F: Field>(basis: &MatrixSpanBasis<F>) -> PairPartition {
    let frame = &basis.frame;
    let nc = frame.num_coords();
    let mut coord_class = Vec::with_capacity(nc);
    let mut seen: HashMap<Vec<&F::Elem>, u32> = HashMap::new();
    for x in 0..nc {
        let key: Vec<&F::Elem> = basis.rows.iter().map(|r| &r[x]).collect();
        let next = seen.len() as u32;
        coord_class.push(*seen.entry(key).or_insert(next));
    }
    PairPartition::from_keys(
        frame.blocks.clone(),
        frame.coord.iter().map(|&x| coord_class[x as usize]),
    )
}
