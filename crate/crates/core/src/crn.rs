//! Bimolecular reaction networks: text format, validation, and the species
//! closure that decides which species become positive.
//!
//! Text format, one statement per line (`#` starts a comment):
//!
//! ```text
//! species: S1, S2
//! kernel k1 = tophat(radius=0.25, rate=5)
//! S1 + S2 -> S2 + S2 @ k1
//! ```
//!
//! Inputs and outputs are stored in ascending species order, so the
//! reaction above becomes `(0, 1) -> (1, 1)` with 0-based indices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::field::DensityField;
use crate::kernels::{Kernel, KernelError, KernelShape};

/// Largest supported species count.
pub const MAX_SPECIES: usize = u16::MAX as usize;

/// Mass threshold below which a species counts as absent initially.
pub const POSITIVE_MASS_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum CrnError {
    #[error("line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },
    #[error("line {line}: reaction is not bimolecular ({inputs} inputs, {outputs} outputs)")]
    NonBimolecular { line: usize, inputs: usize, outputs: usize },
    #[error("line {line}: unknown kernel {name:?}")]
    UnknownKernel { line: usize, name: String },
    #[error("line {line}: unknown species {name:?} (not in species declaration)")]
    UnknownSpecies { line: usize, name: String },
    #[error("line {line}: more than {MAX_SPECIES} species")]
    SpeciesOverflow { line: usize },
    #[error("line {line}: duplicate reaction")]
    DuplicateReaction { line: usize },
    #[error("line {line}: kernel {name:?} defined twice")]
    DuplicateKernel { line: usize, name: String },
    #[error("line {line}: species {name:?} declared twice")]
    DuplicateSpecies { line: usize, name: String },
    #[error("line {line}: {source}")]
    Kernel { line: usize, source: KernelError },
    #[error("reaction references species {index} but the network has {n_species}")]
    SpeciesIndex { index: usize, n_species: usize },
    #[error("field has {field} species but the network has {network}")]
    SpeciesMismatch { field: usize, network: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    /// Input pair `(k, l)`, `k <= l`, 0-based.
    pub input: (usize, usize),
    /// Output pair `(k', l')`, `k' <= l'`, 0-based.
    pub output: (usize, usize),
    pub kernel_name: String,
    pub kernel: Kernel,
}

impl Reaction {
    /// Builds a reaction, sorting both pairs into ascending order.
    pub fn new(input: (usize, usize), output: (usize, usize), kernel_name: &str, kernel: Kernel) -> Self {
        Reaction { input: ascending(input), output: ascending(output), kernel_name: kernel_name.to_string(), kernel }
    }

    /// Order-sensitive input indicator: 1 iff `(a, b) == (k, l)`.
    #[inline]
    pub fn matches_input(&self, a: usize, b: usize) -> bool {
        (a, b) == self.input
    }

    #[inline]
    pub fn matches_output(&self, a: usize, b: usize) -> bool {
        (a, b) == self.output
    }

    pub fn is_identity(&self) -> bool {
        self.input == self.output
    }
}

fn ascending((a, b): (usize, usize)) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<String>,
    reactions: Vec<Reaction>,
    kernels: BTreeMap<String, Kernel>,
}

impl ReactionNetwork {
    /// Validates and assembles a network. Pairs are normalized to ascending
    /// order; each reaction's kernel must be present in `kernels`.
    pub fn new(
        species: Vec<String>,
        kernels: BTreeMap<String, Kernel>,
        reactions: Vec<Reaction>,
    ) -> Result<Self, CrnError> {
        let n = species.len();
        if n > MAX_SPECIES {
            return Err(CrnError::SpeciesOverflow { line: 0 });
        }
        let mut seen = BTreeSet::new();
        for name in &species {
            if !seen.insert(name.as_str()) {
                return Err(CrnError::DuplicateSpecies { line: 0, name: name.clone() });
            }
        }
        let mut out: Vec<Reaction> = Vec::with_capacity(reactions.len());
        for r in reactions {
            let r = Reaction::new(r.input, r.output, &r.kernel_name, r.kernel);
            for idx in [r.input.0, r.input.1, r.output.0, r.output.1] {
                if idx >= n {
                    return Err(CrnError::SpeciesIndex { index: idx + 1, n_species: n });
                }
            }
            match kernels.get(&r.kernel_name) {
                Some(k) if *k == r.kernel => {}
                _ => return Err(CrnError::UnknownKernel { line: 0, name: r.kernel_name }),
            }
            if out.iter().any(|o| o.input == r.input && o.output == r.output && o.kernel_name == r.kernel_name) {
                return Err(CrnError::DuplicateReaction { line: 0 });
            }
            out.push(r);
        }
        Ok(ReactionNetwork { species, reactions: out, kernels })
    }

    /// Network with `n` species named `S1..Sn` and no reactions.
    pub fn empty(n_species: usize) -> Self {
        ReactionNetwork {
            species: (1..=n_species).map(|i| format!("S{i}")).collect(),
            reactions: Vec::new(),
            kernels: BTreeMap::new(),
        }
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn species_names(&self) -> &[String] {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn kernels(&self) -> &BTreeMap<String, Kernel> {
        &self.kernels
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    /// `sum_R ||Phi_R||_inf`.
    pub fn total_linf(&self) -> f64 {
        self.reactions.iter().map(|r| r.kernel.rate).sum()
    }

    /// Largest single-reaction sup norm.
    pub fn max_linf(&self) -> f64 {
        self.reactions.iter().map(|r| r.kernel.rate).fold(0.0, f64::max)
    }

    /// Mass-action rate constants `lambda_R = ||Phi_R||_{L1}`.
    pub fn rate_constants(&self, dim: usize) -> Vec<f64> {
        self.reactions.iter().map(|r| r.kernel.norms(dim).l1).collect()
    }

    /// Smallest superset of `v0` closed under "all inputs present implies
    /// both outputs present". Species are 0-based.
    pub fn closure(&self, v0: &BTreeSet<usize>) -> BTreeSet<usize> {
        self.closure_with_steps(v0).0
    }

    /// Closure plus the number of growth rounds it took.
    pub fn closure_with_steps(&self, v0: &BTreeSet<usize>) -> (BTreeSet<usize>, usize) {
        let mut current = v0.clone();
        let mut rounds = 0;
        loop {
            let mut next = current.clone();
            for r in &self.reactions {
                if current.contains(&r.input.0) && current.contains(&r.input.1) {
                    next.insert(r.output.0);
                    next.insert(r.output.1);
                }
            }
            if next.len() == current.len() {
                return (current, rounds);
            }
            current = next;
            rounds += 1;
        }
    }

    /// Species with initial mass above [`POSITIVE_MASS_TOL`].
    pub fn initially_present(&self, rho0: &DensityField) -> Result<BTreeSet<usize>, CrnError> {
        if rho0.n_species() != self.n_species() {
            return Err(CrnError::SpeciesMismatch { field: rho0.n_species(), network: self.n_species() });
        }
        Ok((0..self.n_species()).filter(|&s| rho0.species_mass(s) > POSITIVE_MASS_TOL).collect())
    }

    /// Whether the closure of the initially present species is everything.
    pub fn is_propagating(&self, rho0: &DensityField) -> Result<bool, CrnError> {
        let v0 = self.initially_present(rho0)?;
        Ok(self.closure(&v0).len() == self.n_species())
    }
}

impl fmt::Display for ReactionNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "species: {}", self.species.join(", "))?;
        for (name, k) in &self.kernels {
            writeln!(f, "kernel {name} = {k}")?;
        }
        for r in &self.reactions {
            let s = &self.species;
            writeln!(
                f,
                "{} + {} -> {} + {} @ {}",
                s[r.input.0], s[r.input.1], s[r.output.0], s[r.output.1], r.kernel_name
            )?;
        }
        Ok(())
    }
}

/// Line, input, output, kernel name and kernel column of a parsed reaction.
type PendingReaction = (usize, (usize, usize), (usize, usize), String, usize);

/// Parses network source text.
pub fn parse_network(text: &str) -> Result<ReactionNetwork, CrnError> {
    let mut declared: Option<Vec<String>> = None;
    let mut species: Vec<String> = Vec::new();
    let mut kernels: BTreeMap<String, Kernel> = BTreeMap::new();
    let mut pending: Vec<PendingReaction> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let lead = content.len() - content.trim_start().len();
        let body = content.trim();
        if let Some(rest) = body.strip_prefix("species:") {
            if declared.is_some() || !pending.is_empty() {
                return Err(syntax(line, lead + 1, "species line must come first and appear once"));
            }
            let mut names = Vec::new();
            let mut offset = lead + "species:".len();
            for tok in rest.split(',') {
                let name = tok.trim();
                let col = offset + tok.len() - tok.trim_start().len() + 1;
                offset += tok.len() + 1;
                check_name(name, line, col)?;
                if names.iter().any(|n: &String| n == name) {
                    return Err(CrnError::DuplicateSpecies { line, name: name.to_string() });
                }
                names.push(name.to_string());
            }
            if names.len() > MAX_SPECIES {
                return Err(CrnError::SpeciesOverflow { line });
            }
            species = names.clone();
            declared = Some(names);
        } else if body.starts_with("kernel ") || body == "kernel" {
            let (name, kernel) = parse_kernel_line(body, line, lead)?;
            if kernels.contains_key(&name) {
                return Err(CrnError::DuplicateKernel { line, name });
            }
            kernels.insert(name, kernel);
        } else {
            let (inputs, outputs, kname, kcol) = parse_reaction_line(content, line)?;
            if inputs.len() != 2 || outputs.len() != 2 {
                return Err(CrnError::NonBimolecular { line, inputs: inputs.len(), outputs: outputs.len() });
            }
            let mut idx = Vec::with_capacity(4);
            for name in inputs.iter().chain(outputs.iter()) {
                let pos = match species.iter().position(|s| s == name) {
                    Some(p) => p,
                    None if declared.is_some() => {
                        return Err(CrnError::UnknownSpecies { line, name: name.clone() })
                    }
                    None => {
                        if species.len() == MAX_SPECIES {
                            return Err(CrnError::SpeciesOverflow { line });
                        }
                        species.push(name.clone());
                        species.len() - 1
                    }
                };
                idx.push(pos);
            }
            pending.push((line, ascending((idx[0], idx[1])), ascending((idx[2], idx[3])), kname, kcol));
        }
    }

    let mut reactions: Vec<Reaction> = Vec::with_capacity(pending.len());
    for (line, input, output, kname, _) in pending {
        let kernel = *kernels
            .get(&kname)
            .ok_or_else(|| CrnError::UnknownKernel { line, name: kname.clone() })?;
        if reactions.iter().any(|r| r.input == input && r.output == output && r.kernel_name == kname) {
            return Err(CrnError::DuplicateReaction { line });
        }
        reactions.push(Reaction { input, output, kernel_name: kname, kernel });
    }
    Ok(ReactionNetwork { species, reactions, kernels })
}

fn syntax(line: usize, column: usize, msg: impl Into<String>) -> CrnError {
    CrnError::Syntax { line, column, msg: msg.into() }
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn check_name(name: &str, line: usize, col: usize) -> Result<(), CrnError> {
    if is_name(name) {
        Ok(())
    } else {
        Err(syntax(line, col, format!("invalid name {name:?}")))
    }
}

/// Splits one side of a reaction into molecule names, expanding integer
/// coefficients (`2S2` or `2 S2`).
fn parse_side(side: &str, line: usize, base: usize) -> Result<Vec<String>, CrnError> {
    let mut out = Vec::new();
    let mut offset = base;
    for term in side.split('+') {
        let t = term.trim();
        let col = offset + term.len() - term.trim_start().len() + 1;
        offset += term.len() + 1;
        if t.is_empty() {
            return Err(syntax(line, col, "empty term"));
        }
        let digits: String = t.chars().take_while(|c| c.is_ascii_digit()).collect();
        let (count, name) = if digits.is_empty() {
            (1, t)
        } else {
            let c: usize = digits.parse().map_err(|_| syntax(line, col, "bad coefficient"))?;
            (c, t[digits.len()..].trim())
        };
        check_name(name, line, col)?;
        for _ in 0..count {
            out.push(name.to_string());
        }
    }
    Ok(out)
}

type ParsedReaction = (Vec<String>, Vec<String>, String, usize);

fn parse_reaction_line(content: &str, line: usize) -> Result<ParsedReaction, CrnError> {
    let arrow = content
        .find("->")
        .ok_or_else(|| syntax(line, content.len() - content.trim_start().len() + 1, "expected '->'"))?;
    let (lhs, rest) = content.split_at(arrow);
    let rest = &rest[2..];
    if let Some(p) = rest.find("->") {
        return Err(syntax(line, arrow + 3 + p, "more than one '->'"));
    }
    let at = rest
        .find('@')
        .ok_or_else(|| syntax(line, content.trim_end().len() + 1, "expected '@ <kernel>'"))?;
    let (rhs, kpart) = rest.split_at(at);
    let kname = kpart[1..].trim();
    let kcol = arrow + 2 + at + 2 + kpart[1..].len() - kpart[1..].trim_start().len();
    check_name(kname, line, kcol)?;
    let inputs = parse_side(lhs, line, 0)?;
    let outputs = parse_side(rhs, line, arrow + 2)?;
    Ok((inputs, outputs, kname.to_string(), kcol))
}

fn parse_kernel_line(body: &str, line: usize, lead: usize) -> Result<(String, Kernel), CrnError> {
    let rest = &body["kernel".len()..];
    let eq = rest.find('=').ok_or_else(|| syntax(line, lead + body.len() + 1, "expected '='"))?;
    let name = rest[..eq].trim();
    check_name(name, line, lead + "kernel ".len() + 1)?;
    let spec = rest[eq + 1..].trim();
    let spec_col = lead + body.len() - spec.len() + 1;
    let open = spec.find('(').ok_or_else(|| syntax(line, spec_col, "expected '(' after kernel shape"))?;
    if !spec.ends_with(')') {
        return Err(syntax(line, spec_col + spec.len(), "expected ')'"));
    }
    let shape = spec[..open].trim();
    let mut args: BTreeMap<String, f64> = BTreeMap::new();
    let inner = &spec[open + 1..spec.len() - 1];
    if !inner.trim().is_empty() {
        for arg in inner.split(',') {
            let (k, v) = arg
                .split_once('=')
                .ok_or_else(|| syntax(line, spec_col + open + 1, format!("expected key=value, got {:?}", arg.trim())))?;
            let value: f64 = v
                .trim()
                .parse()
                .map_err(|_| syntax(line, spec_col + open + 1, format!("bad number {:?}", v.trim())))?;
            if args.insert(k.trim().to_string(), value).is_some() {
                return Err(syntax(line, spec_col + open + 1, format!("repeated argument {:?}", k.trim())));
            }
        }
    }
    let mut take = |key: &str| {
        args.remove(key)
            .ok_or_else(|| syntax(line, spec_col, format!("{shape} kernel needs '{key}'")))
    };
    let kshape = match shape {
        "tophat" => KernelShape::TopHat { radius: take("radius")? },
        "constant" => KernelShape::Constant,
        "gaussian" => KernelShape::Gaussian { width: take("width")? },
        other => return Err(syntax(line, spec_col, format!("unknown kernel shape {other:?}"))),
    };
    let rate = take("rate")?;
    if let Some(extra) = args.keys().next() {
        return Err(syntax(line, spec_col, format!("unknown argument {extra:?} for {shape}")));
    }
    let kernel = Kernel::new(kshape, rate).map_err(|source| CrnError::Kernel { line, source })?;
    Ok((name.to_string(), kernel))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn special() -> ReactionNetwork {
        parse_network("kernel k1 = tophat(radius=0.25, rate=5)\nS1 + S2 -> S2 + S2 @ k1\n").unwrap()
    }

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    #[test]
    fn parses_the_two_species_example() {
        let net = special();
        assert_eq!(net.n_species(), 2);
        let r = &net.reactions()[0];
        assert_eq!((r.input, r.output), ((0, 1), (1, 1)));
        assert_eq!(r.kernel_name, "k1");
        assert_eq!(r.kernel, Kernel::tophat(0.25, 5.0).unwrap());
    }

    #[test]
    fn identity_reaction_is_accepted() {
        let net = parse_network("kernel k1 = constant(rate=1)\nS1 + S1 -> S1 + S1 @ k1").unwrap();
        assert!(net.reactions()[0].is_identity());
        assert_eq!(net.reactions()[0].input, (0, 0));
    }

    #[test]
    fn rejects_unimolecular() {
        let err = parse_network("kernel k1 = constant(rate=1)\nS1 -> S2 @ k1").unwrap_err();
        assert_eq!(err, CrnError::NonBimolecular { line: 2, inputs: 1, outputs: 1 });
    }

    #[test]
    fn normalizes_descending_pairs() {
        let net = parse_network(
            "species: A, B, C\nkernel k = constant(rate=1)\nC + A -> B + A @ k\n",
        )
        .unwrap();
        assert_eq!(net.reactions()[0].input, (0, 2));
        assert_eq!(net.reactions()[0].output, (0, 1));
    }

    #[test]
    fn coefficient_shorthand() {
        let net = parse_network("kernel k = constant(rate=1)\nS1 + S2 -> 2S2 @ k").unwrap();
        assert_eq!(net.reactions()[0].output, (1, 1));
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            parse_network("S1 + S2 -> S2 + S2 @ nope"),
            Err(CrnError::UnknownKernel { line: 1, .. })
        ));
        assert!(matches!(
            parse_network("kernel k = constant(rate=1)\nS1 + S2 S2 + S2 @ k"),
            Err(CrnError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            parse_network("kernel k = constant(rate=1)\nS1 + S2 -> S2 + S2 @ k\nS2 + S1 -> S2 + S2 @ k"),
            Err(CrnError::DuplicateReaction { line: 3 })
        ));
        assert!(matches!(
            parse_network("species: A\nkernel k = constant(rate=1)\nA + B -> A + A @ k"),
            Err(CrnError::UnknownSpecies { line: 3, .. })
        ));
        assert!(matches!(
            parse_network("kernel k = wedge(rate=1)"),
            Err(CrnError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_network("kernel k = tophat(radius=0.9, rate=1)"),
            Err(CrnError::Kernel { line: 1, .. })
        ));
    }

    #[test]
    fn syntax_error_reports_column() {
        let err = parse_network("kernel k = constant(rate=1)\nS1 + $x -> S2 + S2 @ k").unwrap_err();
        assert_eq!(err, CrnError::Syntax { line: 2, column: 6, msg: "invalid name \"$x\"".into() });
    }

    #[test]
    fn species_overflow() {
        let names: Vec<String> = (0..=MAX_SPECIES).map(|i| format!("X{i}")).collect();
        let text = format!("species: {}", names.join(", "));
        assert_eq!(parse_network(&text), Err(CrnError::SpeciesOverflow { line: 1 }));
    }

    #[test]
    fn closure_examples() {
        let net = special();
        assert_eq!(net.closure(&set(&[0, 1])), set(&[0, 1]));
        assert_eq!(net.closure(&set(&[0])), set(&[0]));
        assert_eq!(net.closure(&set(&[])), set(&[]));
    }

    #[test]
    fn closure_chains_through_intermediates() {
        let net = parse_network(
            "kernel k = constant(rate=1)\nA + B -> A + C @ k\nA + C -> D + D @ k\nD + E -> E + E @ k\n",
        )
        .unwrap();
        let (c, rounds) = net.closure_with_steps(&set(&[0, 1]));
        assert_eq!(c, set(&[0, 1, 2, 3]));
        assert_eq!(rounds, 2);
    }

    #[test]
    fn propagation_examples() {
        let net = special();
        let both = DensityField::uniform(1, 8, &[0.5, 0.5]);
        assert!(net.is_propagating(&both).unwrap());
        let only_first = DensityField::uniform(1, 8, &[1.0, 0.0]);
        assert!(!net.is_propagating(&only_first).unwrap());
        let empty = ReactionNetwork::empty(2);
        assert!(empty.is_propagating(&both).unwrap());
        let three = DensityField::uniform(1, 8, &[0.3, 0.3, 0.4]);
        assert!(matches!(net.is_propagating(&three), Err(CrnError::SpeciesMismatch { .. })));
    }

    #[test]
    fn display_reparses_identically() {
        let net = parse_network(
            "# comment\nkernel b = gaussian(width=0.1, rate=2.5)\nkernel a = constant(rate=1)\nY + X -> X + X @ a\nX + X -> Y + Y @ b\n",
        )
        .unwrap();
        assert_eq!(parse_network(&net.to_string()).unwrap(), net);
    }
}
