//! Multiclass gradient-boosted regression trees with a softmax objective.
//!
//! Every round fits one tree per class to the first and second derivatives of
//! the softmax cross-entropy at the current scores, using exact greedy split
//! search over presorted feature columns. Trees grow level by level.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::activation::softmax;
use crate::nn::argmax;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtConfig {
    pub learning_rate: f64,
    #[serde(alias = "iterations")]
    pub rounds: usize,
    pub max_depth: usize,
    /// L2 penalty on leaf scores.
    pub lambda: f64,
    /// Complexity cost subtracted from every split gain.
    pub gamma: f64,
    pub min_split_gain: f64,
    pub classes: usize,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            learning_rate: 0.5,
            rounds: 500,
            max_depth: 6,
            lambda: 1.0,
            gamma: 0.0,
            min_split_gain: 1e-6,
            classes: 5,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("boosting learning rate must be in (0, 1], got {}", self.learning_rate));
        }
        if self.rounds == 0 {
            return bad("boosting needs at least one round".into());
        }
        if !(self.lambda >= 0.0) || !(self.gamma >= 0.0) {
            return bad(format!("lambda {} and gamma {} must be ≥ 0", self.lambda, self.gamma));
        }
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        Ok(())
    }
}

const HESSIAN_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        score: f64,
    },
}

/// Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(score: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { score }],
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { score } => return score,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[feature] < threshold { left } else { right },
            }
        }
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

/// One list of trees per class; all lists have the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    features: usize,
    trees: Vec<Vec<Tree>>,
}

impl TreeEnsemble {
    pub fn new(classes: usize, features: usize) -> Self {
        TreeEnsemble {
            features,
            trees: vec![Vec::new(); classes],
        }
    }

    /// Builds an ensemble from per-class tree lists.
    pub fn from_trees(features: usize, trees: Vec<Vec<Tree>>) -> Result<Self> {
        let rounds = trees.first().map_or(0, Vec::len);
        if trees.is_empty() || trees.iter().any(|t| t.len() != rounds) {
            return Err(Error::Format("every class needs the same number of trees".into()));
        }
        for t in trees.iter().flatten() {
            validate_tree(t, features)?;
        }
        Ok(TreeEnsemble { features, trees })
    }

    pub fn classes(&self) -> usize {
        self.trees.len()
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn rounds(&self) -> usize {
        self.trees[0].len()
    }

    pub fn trees(&self) -> &[Vec<Tree>] {
        &self.trees
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().flatten().map(Tree::depth).max().unwrap_or(0)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.features {
            return Err(Error::shape(format!(
                "ensemble expects {} features, got {}",
                self.features,
                x.len()
            )));
        }
        Ok(())
    }

    /// Summed leaf scores per class.
    pub fn raw_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(self.trees.iter().map(|ts| ts.iter().map(|t| t.predict(x)).sum()).collect())
    }

    /// Softmax of the summed scores.
    pub fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.raw_scores(x)?))
    }

    /// Class with the highest summed score; ties go to the lowest class.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(argmax(&self.raw_scores(x)?) as u8)
    }

    /// Text dump, one node per line:
    /// `class round node_id kind feature threshold score left_id right_id`.
    pub fn dump(&self) -> String {
        let mut out = format!("# gbt classes={} features={} rounds={}\n", self.classes(), self.features, self.rounds());
        for (c, ts) in self.trees.iter().enumerate() {
            for (r, t) in ts.iter().enumerate() {
                for (id, node) in t.nodes.iter().enumerate() {
                    let _ = match node {
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => writeln!(out, "{c} {r} {id} split {feature} {threshold} - {left} {right}"),
                        Node::Leaf { score } => writeln!(out, "{c} {r} {id} leaf - - {score} - -"),
                    };
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Format("empty tree dump".into()))?;
        let mut classes = None;
        let mut features = None;
        let mut rounds = None;
        let fields = header
            .strip_prefix("# gbt")
            .ok_or_else(|| Error::Format("tree dump header missing".into()))?;
        for kv in fields.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad header field `{kv}`")))?;
            let v: usize = v.parse().map_err(|_| Error::Format(format!("bad header value `{kv}`")))?;
            match k {
                "classes" => classes = Some(v),
                "features" => features = Some(v),
                "rounds" => rounds = Some(v),
                _ => {}
            }
        }
        let (classes, features, rounds) = match (classes, features, rounds) {
            (Some(c), Some(f), Some(r)) if c > 0 => (c, f, r),
            _ => return Err(Error::Format("tree dump header incomplete".into())),
        };
        let mut trees: Vec<Vec<Vec<Option<Node>>>> = vec![vec![Vec::new(); rounds]; classes];
        for (lineno, line) in lines {
            let bad = |what: &str| Error::Format(format!("tree dump line {}: {what}", lineno + 1));
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 9 {
                return Err(bad("expected 9 fields"));
            }
            let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad integer"));
            let real = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            let (c, r, id) = (num(f[0])?, num(f[1])?, num(f[2])?);
            if c >= classes || r >= rounds {
                return Err(bad("class or round out of range"));
            }
            let node = match f[3] {
                "split" => Node::Split {
                    feature: num(f[4])?,
                    threshold: real(f[5])?,
                    left: num(f[7])?,
                    right: num(f[8])?,
                },
                "leaf" => Node::Leaf { score: real(f[6])? },
                _ => return Err(bad("kind must be split or leaf")),
            };
            let tree = &mut trees[c][r];
            if tree.len() <= id {
                tree.resize(id + 1, None);
            }
            if tree[id].replace(node).is_some() {
                return Err(bad("duplicate node id"));
            }
        }
        let trees = trees
            .into_iter()
            .map(|ts| {
                ts.into_iter()
                    .map(|nodes| {
                        let nodes: Option<Vec<Node>> = nodes.into_iter().collect();
                        match nodes {
                            Some(n) if !n.is_empty() => Ok(Tree { nodes: n }),
                            _ => Err(Error::Format("tree dump has missing nodes".into())),
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if rounds == 0 {
            return Ok(TreeEnsemble::new(classes, features));
        }
        TreeEnsemble::from_trees(features, trees)
    }
}

fn validate_tree(t: &Tree, features: usize) -> Result<()> {
    let n = t.nodes.len();
    if n == 0 {
        return Err(Error::Format("tree has no nodes".into()));
    }
    // every node reachable exactly once from the root, children after parents
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    while let Some(id) = stack.pop() {
        if id >= n || std::mem::replace(&mut seen[id], true) {
            return Err(Error::Format(format!("tree node {id} is out of range or shared")));
        }
        if let Node::Split { left, right, .. } = t.nodes[id] {
            if left <= id || right <= id {
                return Err(Error::Format(format!("tree node {id} points backwards")));
            }
            stack.push(left);
            stack.push(right);
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Format("tree has unreachable nodes".into()));
    }
    if t.max_feature().is_some_and(|f| f >= features) {
        return Err(Error::Format("tree splits on a feature outside the input".into()));
    }
    Ok(())
}

/// Feature columns with each column's row order sorted by value.
struct Columns {
    n: usize,
    d: usize,
    values: Vec<f64>,
    sorted: Vec<u32>,
}

impl Columns {
    fn new(x: &[f64], n: usize, d: usize) -> Self {
        let mut values = vec![0.0; n * d];
        for i in 0..n {
            for f in 0..d {
                values[f * n + i] = x[i * d + f];
            }
        }
        let mut sorted = Vec::with_capacity(n * d);
        for f in 0..d {
            let col = &values[f * n..(f + 1) * n];
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            sorted.extend(idx);
        }
        Columns { n, d, values, sorted }
    }

    fn col(&self, f: usize) -> &[f64] {
        &self.values[f * self.n..(f + 1) * self.n]
    }

    fn order(&self, f: usize) -> &[u32] {
        &self.sorted[f * self.n..(f + 1) * self.n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    pub left_grad: f64,
    pub left_hess: f64,
}

/// Loss reduction of splitting a node with totals `(g, h)` into `(gl, hl)` and the rest.
pub fn split_gain(gl: f64, hl: f64, g: f64, h: f64, lambda: f64, gamma: f64) -> f64 {
    let (gr, hr) = (g - gl, h - hl);
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma
}

/// A threshold strictly above `lo` and at most `hi`, normally their midpoint.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo / 2.0 + hi / 2.0;
    if m > lo {
        m
    } else {
        hi
    }
}

/// Relative band within which two gains count as tied. Mirror-image
/// partitions have equal gain in exact arithmetic but can differ in the last
/// bits depending on summation order; inside the band the earlier candidate
/// (lower feature, then lower threshold) is kept.
pub const GAIN_TIE_TOLERANCE: f64 = 1e-12;

/// Whether `gain` beats `best` by more than the tie band.
pub fn improves(gain: f64, best: f64) -> bool {
    gain - best > GAIN_TIE_TOLERANCE * best.abs().max(gain.abs()).max(1.0)
}

pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

const SETTLED: u32 = u32::MAX;

struct Active {
    id: usize,
    grad: f64,
    hess: f64,
}

/// Best split per active node for one feature, scanning thresholds in
/// ascending order and keeping the first strict maximum.
fn scan_feature(
    cols: &Columns,
    f: usize,
    slot_of: &[u32],
    g: &[f64],
    h: &[f64],
    active: &[Active],
    cfg: &GbtConfig,
) -> Vec<Option<SplitCandidate>> {
    let col = cols.col(f);
    let mut acc = vec![(0.0f64, 0.0f64, f64::NAN, false); active.len()];
    let mut best: Vec<Option<SplitCandidate>> = vec![None; active.len()];
    for &i in cols.order(f) {
        let i = i as usize;
        let s = slot_of[i];
        if s == SETTLED {
            continue;
        }
        let s = s as usize;
        let v = col[i];
        let (gl, hl, last, any) = acc[s];
        if any && v > last {
            let node = &active[s];
            let gain = split_gain(gl, hl, node.grad, node.hess, cfg.lambda, cfg.gamma);
            if best[s].is_none_or(|b| improves(gain, b.gain)) {
                best[s] = Some(SplitCandidate {
                    feature: f,
                    threshold: midpoint(last, v),
                    gain,
                    left_grad: gl,
                    left_hess: hl,
                });
            }
        }
        acc[s] = (gl + g[i], hl + h[i], v, true);
    }
    best
}

fn best_splits(cols: &Columns, slot_of: &[u32], g: &[f64], h: &[f64], active: &[Active], cfg: &GbtConfig) -> Vec<Option<SplitCandidate>> {
    let scan = |f: usize| scan_feature(cols, f, slot_of, g, h, active, cfg);
    #[cfg(feature = "parallel")]
    let per_feature: Vec<Vec<Option<SplitCandidate>>> = {
        use rayon::prelude::*;
        (0..cols.d).into_par_iter().map(scan).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_feature: Vec<Vec<Option<SplitCandidate>>> = (0..cols.d).map(scan).collect();

    // fixed reduction order: ascending feature index, strict improvement
    let mut best: Vec<Option<SplitCandidate>> = vec![None; active.len()];
    for cands in per_feature {
        for (b, c) in best.iter_mut().zip(cands) {
            if let Some(c) = c {
                if b.is_none_or(|b| improves(c.gain, b.gain)) {
                    *b = Some(c);
                }
            }
        }
    }
    best
}

fn grow_tree(cols: &Columns, g: &[f64], h: &[f64], cfg: &GbtConfig) -> Tree {
    let n = cols.n;
    let mut nodes: Vec<Node> = vec![Node::Leaf { score: 0.0 }];
    let mut slot_of = vec![0u32; n];
    let mut active = vec![Active {
        id: 0,
        grad: g.iter().sum(),
        hess: h.iter().sum(),
    }];
    let leaf = |a: &Active| Node::Leaf {
        score: cfg.learning_rate * leaf_weight(a.grad, a.hess, cfg.lambda),
    };
    for depth in 0..=cfg.max_depth {
        if active.is_empty() {
            break;
        }
        let best = if depth < cfg.max_depth {
            best_splits(cols, &slot_of, g, h, &active, cfg)
        } else {
            vec![None; active.len()]
        };
        let mut next = Vec::new();
        // per old slot: (feature, threshold, left slot, right slot)
        let mut routes: Vec<Option<(usize, f64, u32, u32)>> = Vec::with_capacity(active.len());
        for (a, cand) in active.iter().zip(best) {
            match cand.filter(|c| c.gain > cfg.min_split_gain) {
                Some(c) => {
                    let (left, right) = (nodes.len(), nodes.len() + 1);
                    nodes.push(Node::Leaf { score: 0.0 });
                    nodes.push(Node::Leaf { score: 0.0 });
                    nodes[a.id] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right,
                    };
                    let ls = next.len() as u32;
                    next.push(Active {
                        id: left,
                        grad: c.left_grad,
                        hess: c.left_hess,
                    });
                    next.push(Active {
                        id: right,
                        grad: a.grad - c.left_grad,
                        hess: a.hess - c.left_hess,
                    });
                    routes.push(Some((c.feature, c.threshold, ls, ls + 1)));
                }
                None => {
                    nodes[a.id] = leaf(a);
                    routes.push(None);
                }
            }
        }
        for (i, s) in slot_of.iter_mut().enumerate() {
            if *s == SETTLED {
                continue;
            }
            *s = match routes[*s as usize] {
                Some((f, thr, l, r)) => {
                    if cols.col(f)[i] < thr {
                        l
                    } else {
                        r
                    }
                }
                None => SETTLED,
            };
        }
        active = next;
    }
    Tree { nodes }
}

/// Fits `config.rounds` rounds on `n` rows of `d` features (row-major).
pub fn fit(x: &[f64], n: usize, d: usize, labels: &[u8], config: &GbtConfig) -> Result<TreeEnsemble> {
    fit_with_progress(x, n, d, labels, config, |_| {})
}

/// As [`fit`], calling `progress(round)` after each completed round.
pub fn fit_with_progress(
    x: &[f64],
    n: usize,
    d: usize,
    labels: &[u8],
    config: &GbtConfig,
    mut progress: impl FnMut(usize),
) -> Result<TreeEnsemble> {
    config.validate()?;
    if n < 2 {
        return Err(Error::Empty("boosting set (at least 2 rows needed)"));
    }
    if x.len() != n * d || labels.len() != n {
        return Err(Error::shape(format!(
            "{} values and {} labels do not form {n} rows of {d} features",
            x.len(),
            labels.len()
        )));
    }
    let k = config.classes;
    if let Some(row) = labels.iter().position(|&l| l as usize >= k) {
        return Err(Error::Data {
            row: row + 1,
            reason: format!("label {} outside 0..{}", labels[row], k - 1),
        });
    }
    let cols = Columns::new(x, n, d);
    let mut scores = vec![0.0; n * k];
    let mut ensemble = TreeEnsemble::new(k, d);
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for round in 0..config.rounds {
        let probs: Vec<f64> = scores.chunks(k).flat_map(softmax).collect();
        let mut new_trees = Vec::with_capacity(k);
        for c in 0..k {
            for i in 0..n {
                let p = probs[i * k + c];
                let y = if labels[i] as usize == c { 1.0 } else { 0.0 };
                g[i] = p - y;
                h[i] = (p * (1.0 - p)).max(HESSIAN_FLOOR);
            }
            new_trees.push(grow_tree(&cols, &g, &h, config));
        }
        for (c, t) in new_trees.into_iter().enumerate() {
            for i in 0..n {
                scores[i * k + c] += t.predict(&x[i * d..(i + 1) * d]);
            }
            ensemble.trees[c].push(t);
        }
        progress(round);
    }
    Ok(ensemble)
}

/// Exhaustive search over every feature and every midpoint between distinct
/// values, with sums recomputed from scratch per candidate. Independent of
/// the presorted scan used by [`fit`]; used to audit it.
pub fn brute_force_best_split(
    x: &[f64],
    n: usize,
    d: usize,
    g: &[f64],
    h: &[f64],
    lambda: f64,
    gamma: f64,
) -> Option<SplitCandidate> {
    let (gt, ht): (f64, f64) = (g.iter().sum(), h.iter().sum());
    let mut best: Option<SplitCandidate> = None;
    for f in 0..d {
        let mut vals: Vec<f64> = (0..n).map(|i| x[i * d + f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let thr = midpoint(w[0], w[1]);
            let (mut gl, mut hl) = (0.0, 0.0);
            for i in 0..n {
                if x[i * d + f] < thr {
                    gl += g[i];
                    hl += h[i];
                }
            }
            let gain = split_gain(gl, hl, gt, ht, lambda, gamma);
            if best.is_none_or(|b| improves(gain, b.gain)) {
                best = Some(SplitCandidate {
                    feature: f,
                    threshold: thr,
                    gain,
                    left_grad: gl,
                    left_hess: hl,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::seeded_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn cfg(rounds: usize) -> GbtConfig {
        GbtConfig {
            rounds,
            classes: 2,
            ..GbtConfig::default()
        }
    }

    #[test]
    fn threshold_data_separates_within_five_rounds() {
        let x: Vec<f64> = (-5..5).map(|i| i as f64 + 0.5).collect();
        let y: Vec<u8> = x.iter().map(|&v| u8::from(v > 0.0)).collect();
        let e = fit(&x, 10, 1, &y, &cfg(5)).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(e.predict(&[*xi]).unwrap(), *yi);
        }
        assert!(e.max_depth() <= 6);
    }

    #[test]
    fn identical_labels_predict_that_label() {
        let x = vec![1.0, 2.0, 3.0, 1.0];
        let e = fit(&x, 4, 1, &[3, 3, 3, 3], &GbtConfig { rounds: 3, ..GbtConfig::default() }).unwrap();
        for probe in [-100.0, 0.0, 2.5, 1e9] {
            assert_eq!(e.predict(&[probe]).unwrap(), 3);
        }
    }

    #[test]
    fn constant_features_give_single_leaf_trees() {
        let x = vec![1.0; 6];
        let e = fit(&x, 6, 1, &[0, 1, 0, 1, 0, 1], &cfg(2)).unwrap();
        assert!(e.trees().iter().flatten().all(|t| t.nodes.len() == 1));
    }

    #[test]
    fn empty_ensemble_ties_to_label_zero() {
        let e = TreeEnsemble::new(5, 3);
        assert_eq!(e.predict(&[1.0, 2.0, 3.0]).unwrap(), 0);
        let p = e.predict_scores(&[0.0; 3]).unwrap();
        assert!(p.iter().all(|&v| (v - 0.2).abs() < 1e-15));
        assert!(e.predict(&[1.0]).is_err());
    }

    fn hand_built() -> TreeEnsemble {
        // class 0: x0 < 0.5 ? 1.0 : (x1 < 2 ? -1.0 : 0.25); class 1: constant 0.1
        let t0 = Tree {
            nodes: vec![
                Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2 },
                Node::Leaf { score: 1.0 },
                Node::Split { feature: 1, threshold: 2.0, left: 3, right: 4 },
                Node::Leaf { score: -1.0 },
                Node::Leaf { score: 0.25 },
            ],
        };
        TreeEnsemble::from_trees(2, vec![vec![t0], vec![Tree::leaf(0.1)]]).unwrap()
    }

    #[test]
    fn hand_built_tree_trace() {
        let e = hand_built();
        assert_eq!(e.raw_scores(&[0.0, 9.0]).unwrap(), vec![1.0, 0.1]);
        assert_eq!(e.raw_scores(&[1.0, 1.0]).unwrap(), vec![-1.0, 0.1]);
        assert_eq!(e.raw_scores(&[1.0, 2.0]).unwrap(), vec![0.25, 0.1]);
        assert_eq!(e.predict(&[0.0, 0.0]).unwrap(), 0);
        assert_eq!(e.predict(&[1.0, 1.0]).unwrap(), 1);
        let p = e.predict_scores(&[1.0, 2.0]).unwrap();
        let z = 0.25f64.exp() + 0.1f64.exp();
        assert!((p[0] - 0.25f64.exp() / z).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(e.max_depth(), 2);
    }

    #[test]
    fn dump_round_trips() {
        let e = hand_built();
        assert_eq!(TreeEnsemble::parse(&e.dump()).unwrap(), e);
        let dump = e.dump();
        assert!(dump.lines().nth(1).unwrap().starts_with("0 0 0 split 0 0.5 - 1 2"));
        assert!(dump.contains("1 0 0 leaf - - 0.1 - -"));
        let mut rng = seeded_rng(4);
        let x: Vec<f64> = (0..120).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y: Vec<u8> = (0..40).map(|_| rng.gen_range(0..5)).collect();
        let fitted = fit(&x, 40, 3, &y, &GbtConfig { rounds: 4, ..GbtConfig::default() }).unwrap();
        assert_eq!(TreeEnsemble::parse(&fitted.dump()).unwrap(), fitted);
    }

    #[test]
    fn corrupt_dumps_rejected() {
        assert!(TreeEnsemble::parse("").is_err());
        assert!(TreeEnsemble::parse("# gbt classes=2 features=1 rounds=1\n0 0 0 leaf - - 1 - -\n").is_err());
        assert!(TreeEnsemble::parse("# gbt classes=1 features=1 rounds=1\n0 0 0 split 0 1 - 0 0\n").is_err());
    }

    #[test]
    fn invalid_config_rejected() {
        for bad in [
            GbtConfig { learning_rate: 0.0, ..GbtConfig::default() },
            GbtConfig { rounds: 0, ..GbtConfig::default() },
            GbtConfig { lambda: -1.0, ..GbtConfig::default() },
        ] {
            assert!(bad.validate().is_err());
        }
        assert!(fit(&[1.0], 1, 1, &[0], &GbtConfig::default()).is_err());
    }

    #[test]
    fn midpoint_separates_adjacent_floats() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let m = midpoint(a, b);
        assert!(a < m && m <= b);
        assert_eq!(midpoint(1.0, 3.0), 2.0);
    }

    #[test]
    fn mirror_splits_tie_to_the_earliest() {
        // thresholds 0.5 and 2.5 cut off one sample with g = 0.7 each way
        let x = [0.0, 1.0, 2.0, 3.0];
        let g = [0.7, -0.1, -0.3, 0.7];
        let h = [0.21, 0.09, 0.09, 0.21];
        let best = brute_force_best_split(&x, 4, 1, &g, &h, 1.0, 0.0).unwrap();
        assert_eq!(best.threshold, 0.5);
        assert!(improves(1.0 + 1e-9, 1.0));
        assert!(!improves(1.0 + 1e-14, 1.0));
    }

    #[test]
    fn first_split_matches_brute_force() {
        let mut rng = seeded_rng(17);
        for _ in 0..30 {
            let n = rng.gen_range(2..=100);
            let d = rng.gen_range(1..=4);
            let x: Vec<f64> = (0..n * d).map(|_| (rng.gen_range(-4.0f64..4.0) * 4.0).round() / 4.0).collect();
            let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..5)).collect();
            let e = fit(&x, n, d, &y, &GbtConfig { rounds: 1, ..GbtConfig::default() }).unwrap();
            let g: Vec<f64> = y.iter().map(|&l| 0.2 - f64::from(u8::from(l == 0))).collect();
            let h = vec![0.16; n];
            let oracle = brute_force_best_split(&x, n, d, &g, &h, 1.0, 0.0);
            match (&e.trees()[0][0].nodes[0], oracle) {
                (Node::Split { feature, threshold, .. }, Some(o)) => {
                    assert_eq!((*feature, *threshold), (o.feature, o.threshold));
                }
                (Node::Leaf { .. }, o) => assert!(o.is_none_or(|o| o.gain <= 1e-6)),
                (n, o) => panic!("tree root {n:?} vs oracle {o:?}"),
            }
        }
    }

    proptest! {
        #[test]
        fn argmax_ignores_common_shift(scores in proptest::collection::vec(-5.0f64..5.0, 5), c in -100.0f64..100.0) {
            let shifted: Vec<f64> = scores.iter().map(|s| s + c).collect();
            prop_assert_eq!(argmax(&scores), argmax(&shifted));
        }

        #[test]
        fn rounds_keep_class_lists_equal(seed in 0u64..50, rounds in 1usize..4) {
            let mut rng = seeded_rng(seed);
            let x: Vec<f64> = (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<u8> = (0..30).map(|_| rng.gen_range(0..5)).collect();
            let e = fit(&x, 30, 2, &y, &GbtConfig { rounds, max_depth: 3, ..GbtConfig::default() }).unwrap();
            prop_assert!(e.trees().iter().all(|t| t.len() == rounds));
            prop_assert!(e.max_depth() <= 3);
            prop_assert_eq!(e.predict_scores(&[0.0, 0.0]).unwrap().len(), 5);
        }
    }
}
