//! Formula parsing, cell layout and hypothesis matrices.
//!
//! Hypothesis matrices are Kronecker compositions of centering matrices
//! `P_l` (factor in the effect), averaging matrices `J_l / l` (factor not in
//! the effect) and identities (nesting parents, MANOVA response dimensions).

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Largest nesting depth supported.
pub const MAX_NESTED_FACTORS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FormulaMode {
    Rm,
    ManovaLong,
    ManovaWide,
}

impl FormulaMode {
    pub fn design_mode(self) -> DesignMode {
        match self {
            FormulaMode::Rm => DesignMode::Rm,
            FormulaMode::ManovaLong | FormulaMode::ManovaWide => DesignMode::Manova,
        }
    }
}

/// Whether response components are commensurate (RM) or not (MANOVA).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DesignMode {
    Rm,
    Manova,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Structure {
    Crossed,
    Nested,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Response {
    Single(String),
    Columns(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedFormula {
    pub text: String,
    pub response: Response,
    /// Factor names in order of first appearance on the right-hand side.
    pub factors: Vec<String>,
    /// Model terms as sorted indices into `factors`, in effect order.
    pub terms: Vec<Vec<usize>>,
    pub structure: Structure,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Tilde,
    Plus,
    Star,
    Colon,
    LParen,
    RParen,
    Comma,
}

fn tokenize(s: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut chars = s.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '~' | '+' | '*' | ':' | '(' | ')' | ',' => {
                chars.next();
                out.push(match c {
                    '~' => Token::Tilde,
                    '+' => Token::Plus,
                    '*' => Token::Star,
                    ':' => Token::Colon,
                    '(' => Token::LParen,
                    ')' => Token::RParen,
                    _ => Token::Comma,
                });
            }
            c if c.is_alphanumeric() || c == '_' || c == '.' => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' || c == '.' {
                        ident.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Token::Ident(ident));
            }
            other => {
                return Err(Error::Formula(format!("unknown operator `{other}`")));
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.next() {
            Some(Token::Ident(s)) => Ok(s),
            Some(t) => Err(Error::Formula(format!("expected {what}, found {t:?}"))),
            None => Err(Error::Formula(format!(
                "expected {what}, found end of formula"
            ))),
        }
    }

    fn response(&mut self) -> Result<Response> {
        let name = match self.peek() {
            Some(Token::Ident(_)) => self.ident("response")?,
            _ => return Err(Error::Formula("empty response".into())),
        };
        if name == "cbind" && self.peek() == Some(&Token::LParen) {
            self.next();
            let mut cols = vec![self.ident("response column")?];
            loop {
                match self.next() {
                    Some(Token::Comma) => cols.push(self.ident("response column")?),
                    Some(Token::RParen) => break,
                    _ => return Err(Error::Formula("unterminated cbind(...)".into())),
                }
            }
            return Ok(Response::Columns(cols));
        }
        Ok(Response::Single(name))
    }

    /// `term := ident (':' ident)*`
    fn term(&mut self) -> Result<Vec<String>> {
        let mut names = vec![self.ident("factor")?];
        while self.peek() == Some(&Token::Colon) {
            self.next();
            names.push(self.ident("factor")?);
        }
        Ok(names)
    }

    /// `product := term ('*' term)*`, expanded into all non-empty unions.
    fn product(&mut self) -> Result<Vec<Vec<String>>> {
        let mut operands = vec![self.term()?];
        while self.peek() == Some(&Token::Star) {
            self.next();
            operands.push(self.term()?);
        }
        if operands.len() > 16 {
            return Err(Error::Formula("too many crossed operands".into()));
        }
        let mut expanded = Vec::new();
        for mask in 1u32..(1 << operands.len()) {
            let mut term: Vec<String> = Vec::new();
            for (k, op) in operands.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    for f in op {
                        if !term.contains(f) {
                            term.push(f.clone());
                        }
                    }
                }
            }
            expanded.push(term);
        }
        Ok(expanded)
    }
}

/// Parse a model formula such as `y ~ A * B` or `cbind(y1, y2) ~ A + A:B`.
pub fn parse_formula(formula: &str, mode: FormulaMode) -> Result<ParsedFormula> {
    let tildes = formula.matches('~').count();
    if tildes != 1 {
        return Err(Error::Formula(format!(
            "formula must contain exactly one `~`, found {tildes}"
        )));
    }
    let mut p = Parser {
        tokens: tokenize(formula)?,
        pos: 0,
    };
    let response = p.response()?;
    match p.next() {
        Some(Token::Tilde) => {}
        _ => return Err(Error::Formula("expected `~` after the response".into())),
    }
    if let Response::Columns(_) = &response {
        if mode != FormulaMode::ManovaWide {
            return Err(Error::Formula(
                "cbind(...) responses are only valid for wide-format data".into(),
            ));
        }
    }

    let mut raw_terms = p.product()?;
    while let Some(tok) = p.next() {
        match tok {
            Token::Plus => raw_terms.extend(p.product()?),
            other => {
                return Err(Error::Formula(format!("unexpected token {other:?}")));
            }
        }
    }

    let mut factors: Vec<String> = Vec::new();
    for t in &raw_terms {
        for f in t {
            if !factors.contains(f) {
                factors.push(f.clone());
            }
        }
    }
    if let Response::Single(r) = &response {
        if factors.contains(r) {
            return Err(Error::Formula(format!("`{r}` is both response and factor")));
        }
    }
    let mut terms: Vec<Vec<usize>> = Vec::new();
    for t in &raw_terms {
        let mut idx: Vec<usize> = t
            .iter()
            .map(|f| {
                factors
                    .iter()
                    .position(|g| g == f)
                    .expect("collected above")
            })
            .collect();
        idx.sort_unstable();
        if !terms.contains(&idx) {
            terms.push(idx);
        }
    }

    let is_main = |k: usize| terms.iter().any(|t| t.len() == 1 && t[0] == k);
    let structure = if (0..factors.len()).all(is_main) {
        terms.sort_by_key(|t| t.iter().map(|&k| 1u64 << k).sum::<u64>());
        Structure::Crossed
    } else {
        let mut chain = terms.clone();
        chain.sort_by_key(|t| t.len());
        let is_chain = chain.iter().enumerate().all(|(k, t)| t.len() == k + 1)
            && chain
                .windows(2)
                .all(|w| w[0].iter().all(|f| w[1].contains(f)))
            && chain.last().map(|t| t.len()) == Some(factors.len());
        if !is_chain {
            return Err(Error::UnsupportedDesign(
                "Designs involving both crossed and nested factors are not implemented".into(),
            ));
        }
        if factors.len() > MAX_NESTED_FACTORS {
            return Err(Error::UnsupportedDesign(format!(
                "nested designs support at most {MAX_NESTED_FACTORS} factors"
            )));
        }
        // Nesting order follows the chain: parent first.
        let mut order = Vec::new();
        for t in &chain {
            for &f in t {
                if !order.contains(&f) {
                    order.push(f);
                }
            }
        }
        let renamed: Vec<String> = order.iter().map(|&k| factors[k].clone()).collect();
        factors = renamed;
        terms = (1..=factors.len()).map(|m| (0..m).collect()).collect();
        Structure::Nested
    };

    if mode == FormulaMode::Rm && structure == Structure::Nested {
        return Err(Error::UnsupportedDesign(
            "nested designs are only available for MANOVA".into(),
        ));
    }

    Ok(ParsedFormula {
        text: formula.trim().to_string(),
        response,
        factors,
        terms,
        structure,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FactorKind {
    WholePlot,
    SubPlot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FactorSpec {
    pub name: String,
    pub levels: Vec<String>,
    pub kind: FactorKind,
}

/// Orders numeric labels numerically and everything else lexicographically.
pub fn compare_levels(a: &str, b: &str) -> Ordering {
    match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

/// Sorts level labels; numeric ordering applies only when every label is numeric.
pub fn sort_levels(levels: &mut Vec<String>) {
    levels.sort();
    levels.dedup();
    if levels.iter().all(|l| l.trim().parse::<f64>().is_ok()) {
        levels.sort_by(|a, b| compare_levels(a, b));
    }
}

impl FactorSpec {
    pub fn from_observed<'a>(
        name: &str,
        kind: FactorKind,
        labels: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        let mut levels: Vec<String> = labels.into_iter().map(str::to_string).collect();
        sort_levels(&mut levels);
        if levels.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "factor `{name}` has no levels"
            )));
        }
        Ok(FactorSpec {
            name: name.to_string(),
            levels,
            kind,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Effect {
    pub name: String,
    /// Indices into [`DesignLayout::factors`].
    pub factors: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignLayout {
    pub mode: DesignMode,
    pub structure: Structure,
    /// Whole-plot factors first, then sub-plot factors; each group in formula order.
    pub factors: Vec<FactorSpec>,
    /// Per-cell whole-plot labels, in cell order.
    pub cells: Vec<Vec<String>>,
    /// Component labels, in component order.
    pub components: Vec<String>,
    /// Sub-plot labels per component (RM only; empty otherwise).
    pub component_levels: Vec<Vec<String>>,
    pub effects: Vec<Effect>,
    /// Levels per nesting depth (nested only).
    nested_counts: Vec<usize>,
    #[serde(skip)]
    cell_lookup: HashMap<Vec<String>, usize>,
    #[serde(skip)]
    component_lookup: HashMap<Vec<String>, usize>,
}

impl DesignLayout {
    pub fn a(&self) -> usize {
        self.cells.len()
    }

    pub fn d(&self) -> usize {
        self.components.len()
    }

    pub fn whole_factors(&self) -> impl Iterator<Item = &FactorSpec> {
        self.factors
            .iter()
            .filter(|f| f.kind == FactorKind::WholePlot)
    }

    pub fn sub_factors(&self) -> impl Iterator<Item = &FactorSpec> {
        self.factors
            .iter()
            .filter(|f| f.kind == FactorKind::SubPlot)
    }

    pub fn n_whole(&self) -> usize {
        self.whole_factors().count()
    }

    pub fn cell_index(&self, whole_labels: &[String]) -> Option<usize> {
        self.cell_lookup.get(whole_labels).copied()
    }

    /// Component index of a sub-plot label combination (RM).
    pub fn component_index(&self, sub_labels: &[String]) -> Option<usize> {
        self.component_lookup.get(sub_labels).copied()
    }

    pub fn cell_label(&self, cell: usize) -> String {
        let names: Vec<&str> = self.whole_factors().map(|f| f.name.as_str()).collect();
        if names.is_empty() {
            return "(all subjects)".into();
        }
        names
            .iter()
            .zip(&self.cells[cell])
            .map(|(n, l)| format!("{n}={l}"))
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn effect(&self, name: &str) -> Option<&Effect> {
        self.effects.iter().find(|e| e.name == name)
    }

    /// Level count used in the hypothesis lattice for factor `k`.
    fn level_count(&self, k: usize) -> usize {
        match self.structure {
            Structure::Nested if self.factors[k].kind == FactorKind::WholePlot => {
                self.nested_counts[k]
            }
            _ => self.factors[k].levels.len(),
        }
    }

    /// Build a layout from a parsed formula and the observed whole-plot label
    /// tuples (one per subject, in the order of `parsed.factors` restricted to
    /// whole-plot factors).
    ///
    /// `sub_factors` lists sub-plot factors (RM); `response_dims` lists
    /// component labels for MANOVA and is ignored for RM.
    pub fn build(
        parsed: &ParsedFormula,
        mode: DesignMode,
        whole_observed: &[Vec<String>],
        sub_factors: Vec<FactorSpec>,
        response_dims: Vec<String>,
        nested_levels_unique: bool,
    ) -> Result<DesignLayout> {
        let n_sub = sub_factors.len();
        if n_sub > parsed.factors.len() {
            return Err(Error::InvalidArgument(format!(
                "{n_sub} sub-plot factors requested but the formula has only {}",
                parsed.factors.len()
            )));
        }
        let n_whole = parsed.factors.len() - n_sub;
        for (k, f) in sub_factors.iter().enumerate() {
            if f.name != parsed.factors[n_whole + k] {
                return Err(Error::InvalidArgument(format!(
                    "sub-plot factor `{}` does not match formula factor `{}`",
                    f.name,
                    parsed.factors[n_whole + k]
                )));
            }
        }
        if whole_observed.iter().any(|w| w.len() != n_whole) {
            return Err(Error::InvalidArgument(
                "observed whole-plot label tuples have the wrong length".into(),
            ));
        }

        let mut factors = Vec::new();
        for k in 0..n_whole {
            factors.push(FactorSpec::from_observed(
                &parsed.factors[k],
                FactorKind::WholePlot,
                whole_observed.iter().map(|w| w[k].as_str()),
            )?);
        }
        if n_whole == 0 && whole_observed.is_empty() {
            return Err(Error::InvalidArgument("no subjects observed".into()));
        }
        factors.extend(sub_factors);

        let mut nested_counts = Vec::new();
        let (cells, cell_lookup) = match parsed.structure {
            Structure::Crossed => {
                let whole: Vec<&FactorSpec> = factors[..n_whole].iter().collect();
                let cells = cartesian(&whole.iter().map(|f| f.levels.clone()).collect::<Vec<_>>());
                let lookup = cells
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.clone(), i))
                    .collect();
                (cells, lookup)
            }
            Structure::Nested => {
                let (cells, counts) = nested_cells(
                    &parsed.factors[..n_whole],
                    whole_observed,
                    nested_levels_unique,
                )?;
                nested_counts = counts;
                let lookup = cells
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.clone(), i))
                    .collect();
                (cells, lookup)
            }
        };

        let (components, component_levels, component_lookup) = match mode {
            DesignMode::Rm => {
                let sub_levels: Vec<Vec<String>> = factors[n_whole..]
                    .iter()
                    .map(|f| f.levels.clone())
                    .collect();
                let combos = cartesian(&sub_levels);
                let labels = combos.iter().map(|c| c.join(":")).collect();
                let lookup = combos
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.clone(), i))
                    .collect();
                (labels, combos, lookup)
            }
            DesignMode::Manova => {
                if n_sub != 0 {
                    return Err(Error::InvalidArgument(
                        "MANOVA designs have no sub-plot factors".into(),
                    ));
                }
                if response_dims.is_empty() {
                    return Err(Error::InvalidArgument("no response dimensions".into()));
                }
                (response_dims, Vec::new(), HashMap::new())
            }
        };

        let name_of = |idx: &[usize]| {
            idx.iter()
                .map(|&k| factors[k].name.as_str())
                .collect::<Vec<_>>()
                .join(":")
        };
        let effects: Vec<Effect> = match mode {
            DesignMode::Rm => {
                let k = factors.len();
                (1u64..(1 << k))
                    .map(|mask| {
                        let idx: Vec<usize> = (0..k).filter(|&j| mask & (1 << j) != 0).collect();
                        Effect {
                            name: name_of(&idx),
                            factors: idx,
                        }
                    })
                    .collect()
            }
            DesignMode::Manova => parsed
                .terms
                .iter()
                .map(|t| Effect {
                    name: name_of(t),
                    factors: t.clone(),
                })
                .collect(),
        };

        Ok(DesignLayout {
            mode,
            structure: parsed.structure,
            factors,
            cells,
            components,
            component_levels,
            effects,
            nested_counts,
            cell_lookup,
            component_lookup,
        })
    }
}

fn cartesian(levels: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = vec![Vec::new()];
    for lv in levels {
        let mut next = Vec::with_capacity(out.len() * lv.len());
        for prefix in &out {
            for l in lv {
                let mut c = prefix.clone();
                c.push(l.clone());
                next.push(c);
            }
        }
        out = next;
    }
    out
}

/// Cells of a balanced nested design, parent levels sorted, children sorted
/// within each parent. Returns the cells and the level count per depth.
fn nested_cells(
    names: &[String],
    observed: &[Vec<String>],
    levels_unique: bool,
) -> Result<(Vec<Vec<String>>, Vec<usize>)> {
    #[derive(Default)]
    struct Node {
        children: BTreeMap<String, Node>,
    }
    let mut root = Node::default();
    for path in observed {
        let mut node = &mut root;
        for label in path {
            node = node.children.entry(label.clone()).or_default();
        }
    }

    fn sorted_children(node: &Node) -> Vec<(&String, &Node)> {
        let mut v: Vec<(&String, &Node)> = node.children.iter().collect();
        let mut keys: Vec<String> = v.iter().map(|(k, _)| (*k).clone()).collect();
        sort_levels(&mut keys);
        v.sort_by_key(|(k, _)| keys.iter().position(|x| x == *k));
        v
    }

    let depth = names.len();
    let mut counts = vec![0usize; depth];
    let mut cells = Vec::new();
    let mut stack: Vec<(Vec<String>, &Node)> = vec![(Vec::new(), &root)];
    while let Some((path, node)) = stack.pop() {
        let k = path.len();
        if k == depth {
            cells.push(path);
            continue;
        }
        let children = sorted_children(node);
        if counts[k] == 0 {
            counts[k] = children.len();
        } else if counts[k] != children.len() {
            return Err(Error::UnsupportedDesign(format!(
                "unbalanced nested design: factor `{}` has {} levels under `{}` but {} elsewhere; only balanced nested designs are supported",
                names[k],
                children.len(),
                path.join(":"),
                counts[k]
            )));
        }
        for (label, child) in children.into_iter().rev() {
            let mut p = path.clone();
            p.push(label.clone());
            stack.push((p, child));
        }
    }

    if !levels_unique {
        // Identical child label sets are required under every parent.
        let mut by_depth: Vec<Option<Vec<String>>> = vec![None; depth];
        let mut parent_sets: BTreeMap<Vec<String>, Vec<String>> = BTreeMap::new();
        for c in &cells {
            for k in 1..depth {
                let entry = parent_sets.entry(c[..k].to_vec()).or_default();
                if !entry.contains(&c[k]) {
                    entry.push(c[k].clone());
                }
            }
        }
        for (parent, children) in parent_sets {
            let k = parent.len();
            match &by_depth[k] {
                None => by_depth[k] = Some(children),
                Some(first) if *first != children => {
                    return Err(Error::UnsupportedDesign(format!(
                        "levels of nested factor `{}` differ across levels of `{}`; set the nested-levels-unique option if nested levels are named uniquely",
                        names[k],
                        names[k - 1]
                    )));
                }
                Some(_) => {}
            }
        }
    }
    Ok((cells, counts))
}

/// Cell and component order of a layout.
pub fn enumerate_cells(layout: &DesignLayout) -> (&[Vec<String>], &[String]) {
    (&layout.cells, &layout.components)
}

#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub effect_name: String,
    /// Contrast matrix; columns indexed by (cell, component).
    pub h: Matrix,
    /// Projection `H' (H H')^+ H`.
    pub t: Matrix,
    pub rank: usize,
    /// Orthonormal rows spanning the range of `t`.
    pub basis: Matrix,
    pub mode: DesignMode,
    /// True when the effect involves whole-plot factors only.
    pub whole_plot_only: bool,
}

impl Hypothesis {
    pub fn from_contrast(
        effect_name: &str,
        h: Matrix,
        mode: DesignMode,
        whole_plot_only: bool,
    ) -> Result<Hypothesis> {
        let hht_pinv = linalg::moore_penrose(&(&h * h.transpose()));
        let t = h.transpose() * hht_pinv * &h;
        let t = (&t + t.transpose()) * 0.5;
        let trace = t.trace();
        let rank = trace.round();
        if (trace - rank).abs() > 1e-6 {
            return Err(Error::Numerical(format!(
                "projection for `{effect_name}` has non-integer trace {trace}"
            )));
        }
        if rank < 0.5 {
            return Err(Error::DegenerateHypothesis(format!(
                "hypothesis `{effect_name}` has rank 0"
            )));
        }
        let basis = linalg::projection_basis(&t)?;
        Ok(Hypothesis {
            effect_name: effect_name.to_string(),
            h,
            t,
            rank: rank as usize,
            basis,
            mode,
            whole_plot_only,
        })
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }
}

pub fn hypothesis_for_effect(layout: &DesignLayout, effect_name: &str) -> Result<Hypothesis> {
    let effect = layout
        .effect(effect_name)
        .ok_or_else(|| Error::UnknownEffect(effect_name.to_string()))?;
    for &k in &effect.factors {
        if layout.level_count(k) < 2 {
            return Err(Error::DegenerateHypothesis(format!(
                "factor `{}` has a single level, effect `{effect_name}` cannot be tested",
                layout.factors[k].name
            )));
        }
    }
    let n_whole = layout.n_whole();
    let deepest = effect.factors.iter().copied().max().unwrap_or(0);

    let mut parts = Vec::with_capacity(layout.factors.len() + 1);
    for k in 0..n_whole {
        let l = layout.level_count(k);
        let in_effect = effect.factors.contains(&k);
        let m = match layout.structure {
            Structure::Crossed if in_effect => linalg::centering(l)?,
            Structure::Crossed => linalg::averaging(l)?,
            Structure::Nested if k < deepest => Matrix::identity(l, l),
            Structure::Nested if k == deepest => linalg::centering(l)?,
            Structure::Nested => linalg::averaging(l)?,
        };
        parts.push(m);
    }
    match layout.mode {
        DesignMode::Rm => {
            for k in n_whole..layout.factors.len() {
                let l = layout.level_count(k);
                parts.push(if effect.factors.contains(&k) {
                    linalg::centering(l)?
                } else {
                    linalg::averaging(l)?
                });
            }
        }
        DesignMode::Manova => parts.push(Matrix::identity(layout.d(), layout.d())),
    }
    let h = linalg::kron_all(&parts)?;
    let whole_plot_only = effect.factors.iter().all(|&k| k < n_whole);
    Hypothesis::from_contrast(effect_name, h, layout.mode, whole_plot_only)
}

pub fn all_hypotheses(layout: &DesignLayout) -> Result<Vec<Hypothesis>> {
    layout
        .effects
        .iter()
        .map(|e| hypothesis_for_effect(layout, &e.name))
        .collect()
}

/// Contrast matrices for two-sample profile analysis over `t` time points.
#[derive(Debug, Clone)]
pub struct ProfileMatrices {
    /// `(I_t ⋮ -I_t)`
    pub identical: Matrix,
    /// `(1_{t-1} ⋮ -I_{t-1}) * identical`
    pub parallel: Matrix,
    /// `P_t (I_t ⋮ I_t)`
    pub flat: Matrix,
}

pub fn rm_profile_matrices(t: usize) -> Result<ProfileMatrices> {
    if t < 2 {
        return Err(Error::InvalidDimension(
            "profile analysis needs at least 2 time points".into(),
        ));
    }
    let eye = Matrix::identity(t, t);
    let mut identical = Matrix::zeros(t, 2 * t);
    identical.view_mut((0, 0), (t, t)).copy_from(&eye);
    identical.view_mut((0, t), (t, t)).copy_from(&(-&eye));

    let mut step = Matrix::zeros(t - 1, t);
    for r in 0..t - 1 {
        step[(r, 0)] = 1.0;
        step[(r, r + 1)] = -1.0;
    }
    let parallel = &step * &identical;

    let mut stacked = Matrix::zeros(t, 2 * t);
    stacked.view_mut((0, 0), (t, t)).copy_from(&eye);
    stacked.view_mut((0, t), (t, t)).copy_from(&eye);
    let flat = linalg::centering(t)? * stacked;

    Ok(ProfileMatrices {
        identical,
        parallel,
        flat,
    })
}

/// Full-row-rank contrast for an effect of a crossed MANOVA design, used for
/// confidence regions.
///
/// Factors in the effect contribute `(1 | -I_{l-1})`, the others `1'/l`; the
/// response dimensions contribute `I_d`. For two groups this is `(I_d | -I_d)`.
pub fn effect_contrast(layout: &DesignLayout, effect_name: &str) -> Result<Matrix> {
    if layout.mode != DesignMode::Manova {
        return Err(Error::UnsupportedDesign(
            "confidence regions are only available for MANOVA designs".into(),
        ));
    }
    if layout.structure != Structure::Crossed {
        return Err(Error::UnsupportedDesign(
            "confidence regions are only available for crossed designs".into(),
        ));
    }
    let effect = layout
        .effect(effect_name)
        .ok_or_else(|| Error::UnknownEffect(effect_name.to_string()))?;
    let mut parts = Vec::with_capacity(layout.factors.len() + 1);
    for (k, f) in layout.factors.iter().enumerate() {
        let l = f.levels.len();
        if effect.factors.contains(&k) {
            if l < 2 {
                return Err(Error::DegenerateHypothesis(format!(
                    "factor `{}` has a single level",
                    f.name
                )));
            }
            let mut m = Matrix::zeros(l - 1, l);
            for r in 0..l - 1 {
                m[(r, 0)] = 1.0;
                m[(r, r + 1)] = -1.0;
            }
            parts.push(m);
        } else {
            parts.push(Matrix::from_element(1, l, 1.0 / l as f64));
        }
    }
    parts.push(Matrix::identity(layout.d(), layout.d()));
    linalg::kron_all(&parts)
}
