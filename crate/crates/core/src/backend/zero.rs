use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ir::{flop_count, Expr, Kernel, LoopClass, Node, Op, Statement, Subscript, Symbol, Table};
use crate::scalar::Scalar;

/// Half-open index range.
pub type Span = (usize, usize);

/// Nonzero column ranges of each table dimension.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct NonzeroLayout {
    /// Per table, one list of ranges per dimension.
    pub tables: BTreeMap<String, Vec<Vec<Span>>>,
}

impl NonzeroLayout {
    /// Whether some dimension of some table has a zero column.
    pub fn has_zeros<T: Scalar>(&self, k: &Kernel<T>) -> bool {
        self.tables.iter().any(|(name, dims)| {
            let t = &k.tables[name];
            dims.iter().zip(&t.dims).any(|(r, d)| r.as_slice() != [(0, k.indices[d])])
        })
    }
}

/// Outcome of the zero-block pass.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ZeroSkip {
    pub layout: NonzeroLayout,
    pub flops_before: u64,
    pub flops_after: u64,
    /// Loops replaced by several range loops.
    pub split_loops: usize,
    pub ranges: usize,
}

fn ranges_of(mask: &[bool]) -> Vec<Span> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &m) in mask.iter().enumerate() {
        match (m, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, mask.len()));
    }
    out
}

fn column_mask<T: Scalar>(k: &Kernel<T>, t: &Table<T>, dim: usize) -> Result<Vec<bool>> {
    let ext: Vec<usize> = t.dims.iter().map(|d| k.extent(d)).collect::<Result<_>>()?;
    let inner: usize = ext[dim + 1..].iter().product();
    let mut mask = vec![false; ext[dim]];
    for (flat, v) in t.values.iter().enumerate() {
        if !v.is_zero() {
            mask[(flat / inner) % ext[dim]] = true;
        }
    }
    Ok(mask)
}

/// Columns of every table dimension that hold only exact zeros, grouped
/// into maximal nonzero ranges.
pub fn detect_zero_blocks<T: Scalar>(k: &Kernel<T>) -> Result<NonzeroLayout> {
    let mut layout = NonzeroLayout::default();
    for (name, t) in &k.tables {
        let dims = (0..t.dims.len()).map(|d| column_mask(k, t, d).map(|m| ranges_of(&m))).collect::<Result<_>>()?;
        layout.tables.insert(name.clone(), dims);
    }
    Ok(layout)
}

/// Bounds of enclosing loops already restricted to a range.
type Bounds = Vec<(String, usize, usize)>;

fn bound<'a>(bounds: &'a Bounds, v: &str) -> Option<&'a (String, usize, usize)> {
    bounds.iter().rev().find(|(n, _, _)| n == v)
}

/// Decides where expressions may be nonzero. Tables are inspected entry by
/// entry under the current loop bounds; a local array is traced back to its
/// definitions with subscripts substituted.
struct Masks<'k, T> {
    k: &'k Kernel<T>,
    defs: BTreeMap<String, Vec<Statement<T>>>,
}

/// Local definitions are followed at most this deep.
const MAX_DEPTH: usize = 16;

impl<'k, T: Scalar> Masks<'k, T> {
    fn new(k: &'k Kernel<T>, layout: &NonzeroLayout) -> Result<Self> {
        for (name, dims) in &layout.tables {
            let t = k
                .tables
                .get(name)
                .ok_or_else(|| Error::InconsistentLayout(format!("layout names unknown table `{name}`")))?;
            if dims.len() != t.dims.len() {
                return Err(Error::InconsistentLayout(format!(
                    "`{name}` has {} dimensions, layout gives {}",
                    t.dims.len(),
                    dims.len()
                )));
            }
            for (p, (d, ranges)) in t.dims.iter().zip(dims).enumerate() {
                let ext = k.extent(d)?;
                let mut m = vec![false; ext];
                for &(s, e) in ranges {
                    if s > e || e > ext {
                        return Err(Error::InconsistentLayout(format!("range {s}..{e} of `{name}` exceeds `{d}`")));
                    }
                    m[s..e].iter_mut().for_each(|x| *x = true);
                }
                if let Some(x) = column_mask(k, t, p)?.iter().zip(&m).position(|(actual, given)| *actual && !*given) {
                    return Err(Error::InconsistentLayout(format!("column {x} of `{name}` along `{d}` holds nonzeros")));
                }
            }
        }
        let mut defs: BTreeMap<String, Vec<Statement<T>>> = BTreeMap::new();
        k.visit_statements(&mut |_, s| {
            if k.locals.contains_key(&s.lhs.name) {
                defs.entry(s.lhs.name.clone()).or_default().push(s.clone());
            }
        });
        Ok(Masks { k, defs })
    }

    fn table(&self, t: &Table<T>, s: &Symbol, var: &str, ext: usize, bounds: &Bounds) -> Vec<bool> {
        let dims: Vec<usize> = t.dims.iter().map(|d| self.k.indices.get(d).copied().unwrap_or(0)).collect();
        let mut mask = vec![false; ext];
        let mut coords = vec![0usize; dims.len()];
        for (flat, v) in t.values.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            let mut rest = flat;
            for p in (0..dims.len()).rev() {
                coords[p] = rest % dims[p];
                rest /= dims[p];
            }
            let mut at = None;
            let mut ok = true;
            for (sub, &c) in s.subs.iter().zip(&coords) {
                match sub {
                    Subscript::Fixed(n) => ok &= c == *n,
                    Subscript::Var(v) if v == var => match at {
                        Some(prev) => ok &= prev == c,
                        None => at = Some(c),
                    },
                    Subscript::Var(v) => {
                        if let Some((_, lo, hi)) = bound(bounds, v) {
                            ok &= *lo <= c && c < *hi;
                        }
                    }
                }
            }
            match (ok, at) {
                (false, _) => {}
                (true, None) => return vec![true; ext],
                (true, Some(x)) => {
                    if let Some(slot) = mask.get_mut(x) {
                        *slot = true;
                    }
                }
            }
        }
        mask
    }

    /// Right-hand side of `def` read at the subscripts of `used`. Indices
    /// free in the definition get names no loop can bind.
    fn instantiate(def: &Statement<T>, used: &Symbol) -> Option<Expr<T>> {
        let mut rhs = def.rhs.clone();
        let bound_vars: Vec<&str> = def.lhs.vars().collect();
        for v in def.rhs.vars() {
            if !bound_vars.contains(&v.as_str()) {
                rhs = rhs.rename_var(&v, &Subscript::Var(format!("{v}'")));
            }
        }
        let mut targets = Vec::new();
        for (p, (d, u)) in def.lhs.subs.iter().zip(&used.subs).enumerate() {
            match (d, u) {
                (Subscript::Fixed(a), Subscript::Fixed(b)) if a != b => return None,
                (Subscript::Var(a), _) => {
                    let tmp = format!("#{p}");
                    rhs = rhs.rename_var(a, &Subscript::Var(tmp.clone()));
                    targets.push((tmp, u.clone()));
                }
                _ => {}
            }
        }
        for (tmp, u) in targets {
            rhs = rhs.rename_var(&tmp, &u);
        }
        Some(rhs)
    }

    fn local(&self, defs: &[Statement<T>], s: &Symbol, var: &str, ext: usize, bounds: &Bounds, depth: usize) -> Vec<bool> {
        if depth >= MAX_DEPTH {
            return vec![true; ext];
        }
        let mut m = vec![false; ext];
        for d in defs {
            if let Some(rhs) = Self::instantiate(d, s) {
                m = or(&m, &self.nonzero_at(&rhs, var, ext, bounds, depth + 1));
            }
        }
        m
    }

    /// Values of `var` at which `e` may be nonzero, with the enclosing loops
    /// restricted to `bounds`.
    fn nonzero(&self, e: &Expr<T>, var: &str, ext: usize, bounds: &Bounds) -> Vec<bool> {
        self.nonzero_at(e, var, ext, bounds, 0)
    }

    fn nonzero_at(&self, e: &Expr<T>, var: &str, ext: usize, bounds: &Bounds, depth: usize) -> Vec<bool> {
        match e {
            Expr::Const(c) => vec![!c.is_zero(); ext],
            Expr::Sym(s) => {
                if let Some(t) = self.k.tables.get(&s.name) {
                    self.table(t, s, var, ext, bounds)
                } else if let Some(defs) = self.defs.get(&s.name) {
                    self.local(defs, s, var, ext, bounds, depth)
                } else {
                    vec![true; ext]
                }
            }
            Expr::Mul(v) => {
                v.iter().fold(vec![true; ext], |acc, f| and(&acc, &self.nonzero_at(f, var, ext, bounds, depth)))
            }
            Expr::Add(v) => {
                v.iter().fold(vec![false; ext], |acc, f| or(&acc, &self.nonzero_at(f, var, ext, bounds, depth)))
            }
            Expr::Div(a, _) => self.nonzero_at(a, var, ext, bounds, depth),
            Expr::Call(..) => vec![true; ext],
        }
    }
}

fn and(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| *x && *y).collect()
}

fn or(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| *x || *y).collect()
}

/// A statement with the loops between the split loop and itself.
struct Site<'a, T> {
    stmt: &'a Statement<T>,
    inner: Vec<(String, usize)>,
}

fn collect_sites<'a, T>(body: &'a [Node<T>], inner: &mut Vec<(String, usize)>, out: &mut Vec<Site<'a, T>>) {
    for n in body {
        match n {
            Node::Stmt(s) => out.push(Site { stmt: s, inner: inner.clone() }),
            Node::Loop(l) => {
                inner.push((l.index.clone(), l.end));
                collect_sites(&l.body, inner, out);
                inner.pop();
            }
        }
    }
}

/// Per statement, its pruned right-hand side (`None` when identically zero).
type Pruned<T> = Vec<Option<Expr<T>>>;

impl<T: Scalar> Masks<'_, T> {
    fn is_zero(&self, e: &Expr<T>, bounds: &Bounds) -> bool {
        !self.nonzero(e, "", 1, bounds)[0]
    }

    /// Drops subterms that vanish under `bounds`. Only exact zeros are
    /// removed, so the remaining arithmetic is unchanged.
    fn prune(&self, e: &Expr<T>, bounds: &Bounds) -> Option<Expr<T>> {
        match e {
            Expr::Const(c) if c.is_zero() => None,
            Expr::Const(_) | Expr::Call(..) => Some(e.clone()),
            Expr::Sym(_) => (!self.is_zero(e, bounds)).then(|| e.clone()),
            Expr::Add(v) => {
                let kept: Vec<Expr<T>> = v.iter().filter_map(|c| self.prune(c, bounds)).collect();
                (!kept.is_empty()).then(|| Expr::add(kept))
            }
            Expr::Mul(v) => {
                let kept: Vec<Expr<T>> = v.iter().map(|c| self.prune(c, bounds)).collect::<Option<_>>()?;
                Some(Expr::Mul(kept))
            }
            Expr::Div(a, b) => Some(Expr::Div(Box::new(self.prune(a, bounds)?), b.clone())),
        }
    }
}

fn specialize<T: Scalar>(body: &[Node<T>], pruned: &Pruned<T>, next: &mut usize) -> Vec<Node<T>> {
    let mut out = Vec::new();
    for n in body {
        match n {
            Node::Stmt(s) => {
                let rhs = pruned[*next].clone();
                *next += 1;
                match rhs {
                    None if s.op == Op::AugAdd => {}
                    rhs => out.push(Node::Stmt(Statement { lhs: s.lhs.clone(), op: s.op, rhs: rhs.unwrap_or_else(Expr::zero) })),
                }
            }
            Node::Loop(l) => {
                let inner = specialize(&l.body, pruned, next);
                if !inner.is_empty() {
                    let mut l = l.clone();
                    l.body = inner;
                    out.push(Node::Loop(l));
                }
            }
        }
    }
    out
}

struct Splitter<'m, 'k, T> {
    masks: &'m Masks<'k, T>,
    split_loops: usize,
    ranges: usize,
}

impl<T: Scalar> Splitter<'_, '_, T> {
    fn prune_sites(&self, sites: &[Site<'_, T>], bounds: &Bounds) -> Pruned<T> {
        sites.iter().map(|site| self.masks.prune(&site.stmt.rhs, bounds)).collect()
    }

    /// Pruned statements at `x`, plus their nonzero pattern along every
    /// inner loop so that values with different inner structure land in
    /// different ranges.
    fn signature(&self, sites: &[Site<'_, T>], var: &str, x: usize, bounds: &mut Bounds) -> (Vec<Option<String>>, Vec<Vec<bool>>) {
        bounds.push((var.to_string(), x, x + 1));
        let pruned = self.prune_sites(sites, bounds);
        let mut inner = Vec::new();
        for (site, p) in sites.iter().zip(&pruned) {
            if let Some(e) = p {
                for (v, ext) in &site.inner {
                    inner.push(self.masks.nonzero(e, v, *ext, bounds));
                }
            }
        }
        bounds.pop();
        (pruned.iter().map(|p| p.as_ref().map(Expr::key)).collect(), inner)
    }

    fn body(&mut self, body: &[Node<T>], bounds: &mut Bounds) -> Vec<Node<T>> {
        let mut out = Vec::new();
        for n in body {
            match n {
                Node::Stmt(_) => out.push(n.clone()),
                Node::Loop(l) if l.class != LoopClass::Linear => {
                    let mut l = l.clone();
                    bounds.push((l.index.clone(), l.start, l.end));
                    l.body = self.body(&l.body, bounds);
                    bounds.pop();
                    out.push(Node::Loop(l));
                }
                Node::Loop(l) => {
                    let mut sites = Vec::new();
                    collect_sites(&l.body, &mut Vec::new(), &mut sites);
                    let mut segments: Vec<(usize, usize, _)> = Vec::new();
                    for x in l.start..l.end {
                        let sig = self.signature(&sites, &l.index, x, bounds);
                        match segments.last_mut() {
                            Some((_, e, s)) if *s == sig => *e = x + 1,
                            _ => segments.push((x, x + 1, sig)),
                        }
                    }
                    let mut pieces = Vec::new();
                    for (s, e, _) in segments {
                        bounds.push((l.index.clone(), s, e));
                        let pruned = self.prune_sites(&sites, bounds);
                        let inner = specialize(&l.body, &pruned, &mut 0);
                        if !inner.is_empty() {
                            let mut piece = l.clone();
                            piece.start = s;
                            piece.end = e;
                            piece.body = self.body(&inner, bounds);
                            pieces.push(Node::Loop(piece));
                        }
                        bounds.pop();
                    }
                    let unchanged =
                        pieces.len() == 1 && matches!(&pieces[0], Node::Loop(p) if p.start == l.start && p.end == l.end);
                    if !unchanged {
                        self.split_loops += 1;
                        self.ranges += pieces.len();
                    }
                    out.extend(pieces);
                }
            }
        }
        out
    }
}

/// Splits linear loops into one loop per range where the set of nonzero
/// summands is constant, dropping summands that are zero in a range.
pub fn restructure_loops<T: Scalar>(k: &Kernel<T>, layout: &NonzeroLayout) -> Result<(Kernel<T>, ZeroSkip)> {
    let masks = Masks::new(k, layout)?;
    let mut sp = Splitter { masks: &masks, split_loops: 0, ranges: 0 };
    let mut out = k.clone();
    out.body = sp.body(&k.body, &mut Vec::new());
    let report = ZeroSkip {
        layout: layout.clone(),
        flops_before: flop_count(k),
        flops_after: flop_count(&out),
        split_loops: sp.split_loops,
        ranges: sp.ranges,
    };
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::eval::relative_error;
    use crate::ir::{evaluate, parse_kernel};
    use serde_json::json;

    #[test]
    fn ranges_of_zero_columns() {
        assert_eq!(ranges_of(&[true, true, false, false, true, true]), vec![(0, 2), (4, 6)]);
        assert_eq!(ranges_of(&[true; 4]), vec![(0, 4)]);
        assert!(ranges_of(&[false; 3]).is_empty());
    }

    fn padded() -> Kernel<f64> {
        padded_with(json!(["+", ["*", "U[i][j]", "U[i][k]"], ["*", "V[i][j]", "V[i][k]"]]))
    }

    fn padded_with(rhs: serde_json::Value) -> Kernel<f64> {
        let doc = json!({
            "indices": {"i": 2, "j": 4, "k": 4},
            "loops": [{"index": "i"}, {"index": "j"}, {"index": "k"}],
            "tables": {
                "U": {"dims": ["i", "j"], "values": [1.0, 2.0, 0.0, 0.0, 3.0, 4.0, 0.0, 0.0]},
                "V": {"dims": ["i", "j"], "values": [0.0, 0.0, 5.0, 6.0, 0.0, 0.0, 7.0, 8.0]}
            },
            "statements": [{"level": 3, "lhs": "A[j][k]", "op": "+=",
                "rhs": rhs}],
            "outputs": {"A": ["j", "k"]}
        });
        parse_kernel(&doc.to_string()).unwrap()
    }

    #[test]
    fn detects_column_blocks() {
        let k = padded();
        let l = detect_zero_blocks(&k).unwrap();
        assert_eq!(l.tables["U"], vec![vec![(0, 2)], vec![(0, 2)]]);
        assert_eq!(l.tables["V"][1], vec![(2, 4)]);
        assert!(l.has_zeros(&k));
    }

    #[test]
    fn complementary_blocks_split_and_agree() {
        let k = padded();
        let (out, rep) = restructure_loops(&k, &detect_zero_blocks(&k).unwrap()).unwrap();
        assert!(rep.flops_after * 4 <= rep.flops_before, "{} -> {}", rep.flops_before, rep.flops_after);
        assert_eq!(relative_error(&evaluate(&k).unwrap(), &evaluate(&out).unwrap()), 0.0);
    }

    #[test]
    fn dense_layout_leaves_kernel() {
        let mut k = padded();
        for t in k.tables.values_mut() {
            t.values.iter_mut().for_each(|v| *v += 10.0);
        }
        let (out, rep) = restructure_loops(&k, &detect_zero_blocks(&k).unwrap()).unwrap();
        assert_eq!(out, k);
        assert_eq!(rep.split_loops, 0);
    }

    #[test]
    fn zero_terms_inside_products_are_pruned() {
        let k = padded_with(json!(["*", ["+", ["*", 2.0, "U[i][j]"], "V[i][j]"], "U[i][k]"]));
        let (out, rep) = restructure_loops(&k, &detect_zero_blocks(&k).unwrap()).unwrap();
        assert!(rep.flops_after < rep.flops_before);
        assert!(!out.to_string().contains(" + "), "{out}");
        assert_eq!(evaluate(&k).unwrap(), evaluate(&out).unwrap());
    }
}
