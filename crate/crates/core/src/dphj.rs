//! Words on a square grid, polynomial combinatorial lines, and the two
//! reductions between line-free word sets and codes with loops.
//!
//! A word assigns a bit to every cell of the [n] x [n] grid. A line fixes
//! the cells outside X x X for some nonempty vertex set X and lets the
//! cells inside move together, giving two completions. Reading the
//! diagonal as loops and the upper triangle as edges, the completions of
//! a line differ by a fully looped clique on X, which is what ties line
//! freeness to the looped-clique code property: a word set built from a
//! family contains a line exactly when the family has a nested pair
//! differing by a looped clique.

use crate::codes::CodeFamily;
use crate::error::{Error, Result};
use crate::f2space::{EdgeIndexSet, SpaceKind};
use crate::graphs::subsets_of_size;
use crate::rational::Dyadic;

/// Full line enumeration is kept to sides where the count is tame; the
/// side-5 count already passes 80 million.
pub const MAX_LINE_SIDE: u16 = 4;

/// Index budget for the concentration scan.
pub const MAX_CONCENTRATION_BITS: u32 = 20;

/// A two-letter word on the [n] x [n] grid, cell (i, j) at bit
/// (i-1) * n + (j-1). The alphabet {1, 2} is carried as {0, 1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SquareWord {
    n: u16,
    bits: u64,
}

impl SquareWord {
    pub fn new(n: u16, bits: u64) -> Result<Self> {
        if n == 0 || n > 8 {
            return Err(Error::Malformed("grid side must be between 1 and 8".into()));
        }
        let cells = (n as u32) * (n as u32);
        if cells < 64 && bits >> cells != 0 {
            return Err(Error::Malformed("word has bits beyond the grid".into()));
        }
        Ok(SquareWord { n, bits })
    }

    pub fn n(&self) -> u16 {
        self.n
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Row-major cell index of (i, j), both one-based.
    pub fn position(n: u16, i: u16, j: u16) -> Result<u32> {
        if i < 1 || i > n || j < 1 || j > n {
            return Err(Error::VertexOutOfRange(i.max(j)));
        }
        Ok((i as u32 - 1) * n as u32 + (j as u32 - 1))
    }

    pub fn get(&self, i: u16, j: u16) -> Result<bool> {
        Ok(self.bits >> Self::position(self.n, i, j)? & 1 == 1)
    }

    /// Does the word agree with its transpose?
    pub fn is_symmetric(&self) -> bool {
        for i in 1..=self.n {
            for j in i + 1..=self.n {
                let a = self.bits >> ((i as u32 - 1) * self.n as u32 + (j as u32 - 1)) & 1;
                let b = self.bits >> ((j as u32 - 1) * self.n as u32 + (i as u32 - 1)) & 1;
                if a != b {
                    return false;
                }
            }
        }
        true
    }
}

pub fn word_to_json(w: &SquareWord) -> String {
    let rows: Vec<Vec<u8>> = (1..=w.n)
        .map(|i| (1..=w.n).map(|j| w.get(i, j).expect("in range") as u8).collect())
        .collect();
    serde_json::json!({ "n": w.n, "rows": rows }).to_string()
}

pub fn word_from_json(s: &str) -> Result<SquareWord> {
    let v: serde_json::Value =
        serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))?;
    let n = v["n"].as_u64().ok_or_else(|| Error::Malformed("missing n".into()))? as u16;
    let rows = v["rows"].as_array().ok_or_else(|| Error::Malformed("missing rows".into()))?;
    if rows.len() != n as usize {
        return Err(Error::Malformed("row count must equal n".into()));
    }
    let mut bits = 0u64;
    for (i, row) in rows.iter().enumerate() {
        let cells = row.as_array().ok_or_else(|| Error::Malformed("rows must be arrays".into()))?;
        if cells.len() != n as usize {
            return Err(Error::Malformed("row length must equal n".into()));
        }
        for (j, c) in cells.iter().enumerate() {
            match c.as_u64() {
                Some(0) => {}
                Some(1) => bits |= 1 << (i as u32 * n as u32 + j as u32),
                _ => return Err(Error::Malformed("cells must be 0 or 1".into())),
            }
        }
    }
    SquareWord::new(n, bits)
}

/// A polynomial combinatorial line: the cells of X x X move together, the
/// rest are frozen. The two completions assign 0 and 1 to the moving part.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyLine {
    n: u16,
    x_set: Vec<u16>,
    fixed: u64,
}

impl PolyLine {
    pub fn new(n: u16, x_set: &[u16], fixed: u64) -> Result<Self> {
        if n == 0 || n > 8 {
            return Err(Error::Malformed("grid side must be between 1 and 8".into()));
        }
        if x_set.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !x_set.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Malformed("variable set must be strictly increasing".into()));
        }
        for &v in x_set {
            if v < 1 || v > n {
                return Err(Error::VertexOutOfRange(v));
            }
        }
        let line = PolyLine { n, x_set: x_set.to_vec(), fixed };
        let cells = (n as u32) * (n as u32);
        if cells < 64 && fixed >> cells != 0 {
            return Err(Error::Malformed("fixed part has bits beyond the grid".into()));
        }
        if fixed & line.var_mask() != 0 {
            return Err(Error::Malformed("fixed part must vanish on the moving cells".into()));
        }
        Ok(line)
    }

    pub fn n(&self) -> u16 {
        self.n
    }

    pub fn x_set(&self) -> &[u16] {
        &self.x_set
    }

    pub fn fixed(&self) -> u64 {
        self.fixed
    }

    /// The cells of X x X.
    pub fn var_mask(&self) -> u64 {
        let mut mask = 0u64;
        for &i in &self.x_set {
            for &j in &self.x_set {
                mask |= 1 << ((i as u32 - 1) * self.n as u32 + (j as u32 - 1));
            }
        }
        mask
    }

    /// The completions v(0) and v(1); they agree off X x X and differ on
    /// every cell of it.
    pub fn completions(&self) -> (SquareWord, SquareWord) {
        let v0 = SquareWord { n: self.n, bits: self.fixed };
        let v1 = SquareWord { n: self.n, bits: self.fixed | self.var_mask() };
        (v0, v1)
    }
}

/// Every polynomial line of the side-n grid, ordered by variable-set size,
/// then variable set, then frozen assignment.
pub fn enumerate_lines(n: u16) -> Result<Vec<PolyLine>> {
    if n == 0 {
        return Err(Error::Malformed("grid side must be positive".into()));
    }
    if n > MAX_LINE_SIDE {
        return Err(Error::TooLarge(format!(
            "full line enumeration supports sides up to {MAX_LINE_SIDE}, got {n}"
        )));
    }
    let cells = (n as u32) * (n as u32);
    let mut out = Vec::new();
    for size in 1..=n {
        for x_set in subsets_of_size(n, size) {
            let probe = PolyLine::new(n, &x_set, 0)?;
            let var = probe.var_mask();
            let free: Vec<u32> = (0..cells).filter(|c| var >> c & 1 == 0).collect();
            for packed in 0..1u64 << free.len() {
                let mut fixed = 0u64;
                for (k, &c) in free.iter().enumerate() {
                    fixed |= (packed >> k & 1) << c;
                }
                out.push(PolyLine { n, x_set: x_set.clone(), fixed });
            }
        }
    }
    Ok(out)
}

fn grid_side(space: EdgeIndexSet) -> Result<u16> {
    let len = space.len();
    let side = (len as f64).sqrt().round() as u32;
    if side == 0 || side * side != len {
        return Err(Error::Malformed("word sets live on a square grid".into()));
    }
    Ok(side as u16)
}

/// Scan every line for one whose both completions lie in the set; None
/// means the set is line-free. The witness is the first hit in
/// enumeration order.
pub fn is_line_free(a: &CodeFamily) -> Result<Option<PolyLine>> {
    let n = grid_side(a.space())?;
    for line in enumerate_lines(n)? {
        let (v0, v1) = line.completions();
        if a.contains(v0.bits()) && a.contains(v1.bits()) {
            return Ok(Some(line));
        }
    }
    Ok(None)
}

/// Lift a family of graphs with loops to the word set reading the
/// diagonal as loops and the upper triangle as edges. The strictly lower
/// triangle is unconstrained, so the density is preserved exactly, and
/// the result contains a line exactly when the family has a nested pair
/// differing by a fully looped clique.
pub fn code_to_word_set(fam: &CodeFamily) -> Result<CodeFamily> {
    let space = fam.space();
    if space.kind() != SpaceKind::PairsLoops {
        return Err(Error::Malformed("the reduction starts from a looped space".into()));
    }
    let n = space.n();
    let cells = (n as u32) * (n as u32);
    if cells > 26 {
        return Err(Error::TooLarge(format!("word tables need 2^{cells} entries")));
    }
    // graph position -> word cell of (min, max)
    let readout: Vec<u32> = (0..space.len())
        .map(|p| {
            let (u, v) = space.key_at(p).expect("in range");
            (u as u32 - 1) * n as u32 + (v as u32 - 1)
        })
        .collect();
    let words = EdgeIndexSet::generic(cells)?;
    CodeFamily::from_fn(words, |x| {
        let mut graph = 0u64;
        for (p, &cell) in readout.iter().enumerate() {
            graph |= (x >> cell & 1) << p;
        }
        fam.contains(graph)
    })
}

/// Restrict a set of symmetric words to the upper triangle with the
/// diagonal, producing a family of graphs with loops. The map is a
/// bijection between symmetric words and graphs, so density against the
/// symmetric words equals the output density exactly.
pub fn word_set_to_code(b: &CodeFamily) -> Result<CodeFamily> {
    let n = grid_side(b.space())?;
    for x in b.members() {
        if !(SquareWord { n, bits: x }).is_symmetric() {
            return Err(Error::NotSymmetric);
        }
    }
    let graphs = EdgeIndexSet::pairs_loops(n)?;
    // graph -> the symmetric word with that upper part
    let spread: Vec<u64> = (0..graphs.len())
        .map(|p| {
            let (u, v) = graphs.key_at(p).expect("in range");
            let mut m = 1u64 << ((u as u32 - 1) * n as u32 + (v as u32 - 1));
            m |= 1u64 << ((v as u32 - 1) * n as u32 + (u as u32 - 1));
            m
        })
        .collect();
    CodeFamily::from_fn(graphs, |y| {
        let mut word = 0u64;
        for (p, &m) in spread.iter().enumerate() {
            if y >> p & 1 == 1 {
                word |= m;
            }
        }
        b.contains(word)
    })
}

/// Outcome of the concentration scan: the first block all of whose
/// sections stay within the tolerance, one-based, and whether the
/// block-count hypothesis that guarantees a find was actually met.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcentrationScan {
    pub i0: Option<usize>,
    pub hypothesis_met: bool,
}

/// Scan disjoint index blocks for one on which the set's conditional
/// densities are all within eps of the global density, exactly. With at
/// least 2^(m+1) / eps^2 blocks of size at most m such a block must
/// exist; with fewer the scan still runs and may come back empty.
pub fn conditional_concentration(
    a: &CodeFamily,
    blocks: &[Vec<u32>],
    eps: &Dyadic,
) -> Result<ConcentrationScan> {
    let space = a.space();
    let len = space.len();
    if len > MAX_CONCENTRATION_BITS {
        return Err(Error::TooLarge(format!(
            "concentration scan supports up to {MAX_CONCENTRATION_BITS} indices, got {len}"
        )));
    }
    if blocks.is_empty() {
        return Err(Error::EmptyInput);
    }
    if eps.is_zero() || eps.is_negative() || *eps > Dyadic::one() {
        return Err(Error::Malformed("tolerance must lie in (0, 1]".into()));
    }
    let mut seen = 0u64;
    let mut m = 0usize;
    for block in blocks {
        if block.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !block.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Malformed("blocks must be strictly increasing".into()));
        }
        for &pos in block {
            if pos >= len {
                return Err(Error::PositionOutOfRange(pos));
            }
            if seen >> pos & 1 == 1 {
                return Err(Error::Malformed("blocks must be pairwise disjoint".into()));
            }
            seen |= 1 << pos;
        }
        m = m.max(block.len());
    }
    let hypothesis_met = &Dyadic::over_pow2(blocks.len() as i64, 0) * &(eps * eps)
        >= Dyadic::pow2(m as i64 + 1);

    let table = space.table_len()? as u64;
    let density = a.density();
    let mut i0 = None;
    'blocks: for (i, block) in blocks.iter().enumerate() {
        let mut counts = vec![0u64; 1 << block.len()];
        for x in 0..table {
            if !a.contains(x) {
                continue;
            }
            let mut section = 0usize;
            for (k, &pos) in block.iter().enumerate() {
                section |= ((x >> pos & 1) as usize) << k;
            }
            counts[section] += 1;
        }
        let section_exp = len as u64 - block.len() as u64;
        for &c in &counts {
            let cond = Dyadic::over_pow2(c as i64, section_exp);
            if cond > &density + eps || density > &cond + eps {
                continue 'blocks;
            }
        }
        i0 = Some(i + 1);
        break;
    }
    assert!(
        i0.is_some() || !hypothesis_met,
        "a qualifying block must exist when the hypothesis holds"
    );
    Ok(ConcentrationScan { i0, hypothesis_met })
}
