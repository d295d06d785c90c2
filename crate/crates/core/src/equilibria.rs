//! Correlated-equilibrium solvers over the dense LP engine.
//!
//! Three variants share one embedding of the deviation system:
//!
//! * [`solve_ce`]: exact correlated equilibria, one linear constraint
//!   per (player, recommendation, alternative) triple, welfare-optimal.
//! * [`solve_rrce`]: the reduced-rank variant that restricts the
//!   correlated strategy to the convex hull of precomputed Nash
//!   equilibria and optimizes over hull coordinates.
//! * [`solve_ccce`]: the chance-constrained variant under independent
//!   Gaussian utility perturbations, where each deviation constraint
//!   must hold with probability at least `alpha` and becomes a concave
//!   margin handled by supergradient cuts.
//!
//! Deviation constraints are kept unnormalized (linear in `z`), so a
//! recommendation with zero marginal mass is vacuously satisfied.

use crate::game::{JointDistribution, NormalFormGame};
use crate::lp::{
    solve_with_concave_cuts, ConcaveConstraint, CutOutcome, LinearProgram, LpSolution,
    DEFAULT_CUT_ROUNDS, DEFAULT_CUT_TOL,
};
use crate::{Error, Result};

/// Cap on joint-action count for the LP-backed solvers.
pub const DEFAULT_SOLVE_CAP: usize = 4096;

/// Default cap on basis members kept by [`build_nash_basis`].
pub const DEFAULT_BASIS_MAX: usize = 32;

/// Margin slack accepted when re-verifying a returned solution.
const VERIFY_TOL: f64 = 1e-6;

/// A successfully computed (or last-iterate) correlated strategy with
/// its diagnostics.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub z: JointDistribution,
    /// Weighted utilitarian objective value at `z`.
    pub welfare: f64,
    pub per_player_payoffs: Vec<f64>,
    /// Minimum deviation gain (CE/RRCE) or chance margin (CCCE) at `z`.
    pub min_margin: f64,
    /// LP solves spent in the cut loop; zero for the pure-LP solvers.
    pub cut_rounds: usize,
    /// Hull coordinates over the basis members, for basis-restricted solves.
    pub basis_weights: Option<Vec<f64>>,
}

/// Solver outcome; `NonConverged` carries the last iterate of the cut
/// loop so callers can still inspect how close it got.
#[derive(Debug, Clone)]
pub enum EquilibriumResult {
    Optimal(Equilibrium),
    NonConverged(Equilibrium),
    Infeasible { cut_rounds: usize },
}

impl EquilibriumResult {
    pub fn optimal(&self) -> Option<&Equilibrium> {
        match self {
            EquilibriumResult::Optimal(eq) => Some(eq),
            _ => None,
        }
    }

    pub fn status_name(&self) -> &'static str {
        match self {
            EquilibriumResult::Optimal(_) => "optimal",
            EquilibriumResult::NonConverged(_) => "non_converged",
            EquilibriumResult::Infeasible { .. } => "infeasible",
        }
    }
}

/// Gaussian perturbation model for the chance-constrained solver: every
/// utility entry of player `i` receives an independent `N(0, sigma_i^2)`
/// shock, and each deviation constraint must hold with probability at
/// least `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    sigma: Vec<f64>,
    alpha: f64,
}

impl NoiseModel {
    /// Requires `sigma_i >= 0` and `alpha` in `[0.5, 1)`, the regime
    /// where the margin stays concave in `z`.
    pub fn new(sigma: Vec<f64>, alpha: f64) -> Result<Self> {
        if sigma.is_empty() {
            return Err(Error::Input("noise model needs at least one player".to_string()));
        }
        for (i, s) in sigma.iter().enumerate() {
            if !s.is_finite() || *s < 0.0 {
                return Err(Error::Input(format!("sigma for player {i} must be finite and >= 0, got {s}")));
            }
        }
        if !(0.5..1.0).contains(&alpha) {
            return Err(Error::Input(format!("alpha must lie in [0.5, 1), got {alpha}")));
        }
        Ok(Self { sigma, alpha })
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `Phi^-1(alpha)`; nonnegative in the accepted range.
    pub fn quantile(&self) -> f64 {
        normal_quantile(self.alpha).expect("alpha validated")
    }

    fn check_game(&self, game: &NormalFormGame) -> Result<()> {
        if self.sigma.len() != game.num_players() {
            return Err(Error::Input(format!(
                "noise model covers {} players, game has {}",
                self.sigma.len(),
                game.num_players()
            )));
        }
        Ok(())
    }
}

/// Chance margin of one deviation constraint: the nominal gain minus
/// `Phi^-1(alpha)` times the standard deviation of the realized gain.
///
/// A deviation compares two disjoint slices of the utility tensor, so
/// with per-entry independent noise the realized gain has variance
/// `2 sigma_i^2 sum_ctx z(rec, ctx)^2`; the constraint holds with
/// probability `alpha` exactly when the margin is nonnegative.
pub fn ccce_margin(
    game: &NormalFormGame,
    z: &JointDistribution,
    noise: &NoiseModel,
    player: usize,
    rec: usize,
    alt: usize,
) -> Result<f64> {
    noise.check_game(game)?;
    let nominal = game.deviation_gain(z, player, rec, alt)?;
    let mut sq = 0.0;
    for idx in 0..game.joint_count() {
        if game.digit(idx, player) == rec {
            let p = z.probs()[idx];
            sq += p * p;
        }
    }
    Ok(nominal - noise.quantile() * noise.sigma()[player] * (2.0 * sq).sqrt())
}

/// Welfare-optimal exact correlated equilibrium via one dense LP.
/// `weights` defaults to all ones (utilitarian welfare).
pub fn solve_ce(game: &NormalFormGame, weights: Option<&[f64]>) -> Result<EquilibriumResult> {
    let w = resolve_weights(game, weights)?;
    check_solve_cap(game)?;
    let n = game.joint_count();
    let mut lp = LinearProgram::maximize(welfare_coeffs(game, &w));
    lp.add_eq(vec![1.0; n], 1.0);
    for (player, rec, alt) in deviation_triples(game) {
        let mut row = vec![0.0; n];
        for (idx, coeff) in slice_coeffs(game, player, rec, alt) {
            row[idx] = -coeff;
        }
        lp.add_less_eq(row, 0.0);
    }
    match crate::lp::solve_lp(&lp)? {
        LpSolution::Optimal { x, .. } => {
            let eq = finish(game, &w, x, 0, None)?;
            if eq.min_margin < -VERIFY_TOL {
                return Err(Error::Numerical(format!(
                    "returned correlated strategy violates a deviation constraint by {}",
                    -eq.min_margin
                )));
            }
            Ok(EquilibriumResult::Optimal(eq))
        }
        // The deviation polytope always contains a correlated
        // equilibrium, so these indicate solver breakdown.
        LpSolution::Infeasible => Err(Error::Numerical("exact CE program reported infeasible".to_string())),
        LpSolution::Unbounded => Err(Error::Numerical("exact CE program reported unbounded".to_string())),
    }
}

/// Which equilibrium enumerators feed [`build_nash_basis`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisSource {
    Pure,
    PureAndMixed2p,
}

/// A validated set of Nash equilibria, stored as joint distributions,
/// whose convex hull the reduced-rank solvers optimize over.
#[derive(Debug, Clone)]
pub struct NashBasis {
    members: Vec<JointDistribution>,
}

impl NashBasis {
    /// Every member must pass `verify_ce` at tolerance `1e-8` and be
    /// distinct from the others beyond `1e-7` in the sup norm.
    pub fn new(game: &NormalFormGame, members: Vec<JointDistribution>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyBasis("no equilibria to build a basis from".to_string()));
        }
        for (k, z) in members.iter().enumerate() {
            let report = game.verify_ce(z, 1e-8)?;
            if !report.pass {
                return Err(Error::Input(format!(
                    "basis member {k} is not an equilibrium (min gain {})",
                    report.min_gain
                )));
            }
        }
        for a in 0..members.len() {
            for b in (a + 1)..members.len() {
                let dist = sup_distance(&members[a], &members[b]);
                if dist <= 1e-7 {
                    return Err(Error::Input(format!(
                        "basis members {a} and {b} coincide (sup distance {dist})"
                    )));
                }
            }
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[JointDistribution] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn sup_distance(a: &JointDistribution, b: &JointDistribution) -> f64 {
    a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Enumerates equilibria, lifts them to joint distributions, drops
/// near-duplicates, and keeps the `max_members` best by utilitarian
/// welfare (ties keep enumeration order, which is ascending joint index
/// for the pure scan).
pub fn build_nash_basis(
    game: &NormalFormGame,
    source: BasisSource,
    max_members: usize,
) -> Result<NashBasis> {
    if max_members == 0 {
        return Err(Error::Input("basis needs room for at least one member".to_string()));
    }
    let mut members: Vec<JointDistribution> = Vec::new();
    let mut push = |z: JointDistribution, members: &mut Vec<JointDistribution>| {
        if !members.iter().any(|m| sup_distance(m, &z) <= 1e-7) {
            members.push(z);
        }
    };
    for profile in crate::game::enumerate_pure_nash(game, crate::game::DEFAULT_ENUM_CAP)? {
        let idx = game.joint_index(&profile)?;
        push(JointDistribution::point_mass(idx, game.joint_count())?, &mut members);
    }
    if source == BasisSource::PureAndMixed2p {
        for mixed in crate::game::enumerate_mixed_nash_2p(game)? {
            push(crate::game::product_distribution(&mixed, game)?, &mut members);
        }
    }
    if members.is_empty() {
        let hint = match source {
            BasisSource::Pure => "no pure Nash equilibrium exists; try including mixed equilibria",
            BasisSource::PureAndMixed2p => "no equilibria found",
        };
        return Err(Error::EmptyBasis(hint.to_string()));
    }
    let ones = vec![1.0; game.num_players()];
    let welfare = |z: &JointDistribution| -> Result<f64> {
        let mut total = 0.0;
        for (p, w) in ones.iter().enumerate() {
            total += w * game.expected_utility(z, p)?;
        }
        Ok(total)
    };
    let mut keyed: Vec<(f64, JointDistribution)> =
        members.into_iter().map(|z| Ok((welfare(&z)?, z))).collect::<Result<_>>()?;
    keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite welfare"));
    keyed.truncate(max_members);
    NashBasis::new(game, keyed.into_iter().map(|(_, z)| z).collect())
}

/// Welfare-optimal correlated strategy restricted to the convex hull of
/// the basis members. Every hull point satisfies the deviation system
/// (the constraints are linear in `z` and hold at each member), so the
/// program is always feasible; the LP runs over hull coordinates.
pub fn solve_rrce(
    game: &NormalFormGame,
    basis: &NashBasis,
    weights: Option<&[f64]>,
) -> Result<EquilibriumResult> {
    let w = resolve_weights(game, weights)?;
    check_solve_cap(game)?;
    let k = basis.len();
    let coeffs = welfare_coeffs(game, &w);
    let member_welfare: Vec<f64> = basis
        .members()
        .iter()
        .map(|z| z.probs().iter().zip(&coeffs).map(|(p, c)| p * c).sum())
        .collect();
    let mut lp = LinearProgram::maximize(member_welfare);
    lp.add_eq(vec![1.0; k], 1.0);
    for (player, rec, alt) in deviation_triples(game) {
        let mut row = vec![0.0; k];
        for (j, z) in basis.members().iter().enumerate() {
            row[j] = -game.deviation_gain(z, player, rec, alt)?;
        }
        lp.add_less_eq(row, 0.0);
    }
    match crate::lp::solve_lp(&lp)? {
        LpSolution::Optimal { x, .. } => {
            let z = assemble_hull_point(basis, &x)?;
            let eq = finish_with_z(game, &w, z, 0, Some(x))?;
            Ok(EquilibriumResult::Optimal(eq))
        }
        _ => Err(Error::Numerical("reduced-rank program must be feasible and bounded".to_string())),
    }
}

/// Welfare-optimal chance-constrained correlated strategy: each
/// deviation margin must be nonnegative. Solved by supergradient cuts
/// over the simplex; `Infeasible` is genuine (cuts never discard a
/// feasible point), and `NonConverged` returns the last iterate.
pub fn solve_ccce(
    game: &NormalFormGame,
    noise: &NoiseModel,
    weights: Option<&[f64]>,
) -> Result<EquilibriumResult> {
    noise.check_game(game)?;
    let w = resolve_weights(game, weights)?;
    check_solve_cap(game)?;
    let n = game.joint_count();
    let mut lp = LinearProgram::maximize(welfare_coeffs(game, &w));
    lp.add_eq(vec![1.0; n], 1.0);
    let constraints = margin_constraints(game, noise);
    let sol = solve_with_concave_cuts(&lp, &constraints, DEFAULT_CUT_TOL, DEFAULT_CUT_ROUNDS)?;
    match sol.outcome {
        CutOutcome::Converged { x, .. } => {
            let eq = finish_ccce(game, noise, &w, x, sol.rounds, None)?;
            if eq.min_margin < -VERIFY_TOL {
                return Err(Error::Numerical(format!(
                    "returned strategy violates a chance constraint by {}",
                    -eq.min_margin
                )));
            }
            Ok(EquilibriumResult::Optimal(eq))
        }
        CutOutcome::RoundLimit { x, .. } => {
            Ok(EquilibriumResult::NonConverged(finish_ccce(game, noise, &w, x, sol.rounds, None)?))
        }
        CutOutcome::Infeasible => Ok(EquilibriumResult::Infeasible { cut_rounds: sol.rounds }),
        CutOutcome::Unbounded => {
            Err(Error::Numerical("chance-constrained program reported unbounded".to_string()))
        }
    }
}

/// [`solve_ccce`] restricted to the convex hull of a Nash basis. The
/// margins stay concave under the affine hull map, so the same cut loop
/// applies in hull coordinates. Useful as a retry when the full program
/// is infeasible or as a low-dimensional surrogate.
pub fn solve_ccce_in_basis(
    game: &NormalFormGame,
    basis: &NashBasis,
    noise: &NoiseModel,
    weights: Option<&[f64]>,
) -> Result<EquilibriumResult> {
    noise.check_game(game)?;
    let w = resolve_weights(game, weights)?;
    check_solve_cap(game)?;
    let k = basis.len();
    let coeffs = welfare_coeffs(game, &w);
    let member_welfare: Vec<f64> = basis
        .members()
        .iter()
        .map(|z| z.probs().iter().zip(&coeffs).map(|(p, c)| p * c).sum())
        .collect();
    let mut lp = LinearProgram::maximize(member_welfare);
    lp.add_eq(vec![1.0; k], 1.0);

    let mut constraints = Vec::new();
    for (player, rec, alt) in deviation_triples(game) {
        let entries = slice_coeffs(game, player, rec, alt);
        // Per member: the linear gain and the member's slice values.
        let member_gain: Vec<f64> = basis
            .members()
            .iter()
            .map(|z| entries.iter().map(|(idx, c)| z.probs()[*idx] * c).sum())
            .collect();
        let member_slice: Vec<Vec<f64>> = basis
            .members()
            .iter()
            .map(|z| entries.iter().map(|(idx, _)| z.probs()[*idx]).collect())
            .collect();
        let scale = noise.quantile() * noise.sigma()[player] * 2.0f64.sqrt();
        constraints.push(ConcaveConstraint::new(move |lambda: &[f64]| {
            let len = member_slice[0].len();
            let mut v = vec![0.0; len];
            for (j, slice) in member_slice.iter().enumerate() {
                for (i, s) in slice.iter().enumerate() {
                    v[i] += lambda[j] * s;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nominal: f64 = member_gain.iter().zip(lambda).map(|(g, l)| g * l).sum();
            let g = nominal - scale * norm;
            let grad: Vec<f64> = member_gain
                .iter()
                .zip(&member_slice)
                .map(|(gain, slice)| {
                    if norm < 1e-14 {
                        *gain
                    } else {
                        let dot: f64 = slice.iter().zip(&v).map(|(s, vi)| s * vi).sum();
                        gain - scale * dot / norm
                    }
                })
                .collect();
            (g, grad)
        }));
    }
    let sol = solve_with_concave_cuts(&lp, &constraints, DEFAULT_CUT_TOL, DEFAULT_CUT_ROUNDS)?;
    match sol.outcome {
        CutOutcome::Converged { x, .. } => {
            let z = assemble_hull_point(basis, &x)?;
            let mut eq = finish_with_z(game, &w, z, sol.rounds, Some(x))?;
            eq.min_margin = min_margin_ccce(game, noise, &eq.z)?;
            if eq.min_margin < -VERIFY_TOL {
                return Err(Error::Numerical(format!(
                    "returned strategy violates a chance constraint by {}",
                    -eq.min_margin
                )));
            }
            Ok(EquilibriumResult::Optimal(eq))
        }
        CutOutcome::RoundLimit { x, .. } => {
            let z = assemble_hull_point(basis, &x)?;
            let mut eq = finish_with_z(game, &w, z, sol.rounds, Some(x))?;
            eq.min_margin = min_margin_ccce(game, noise, &eq.z)?;
            Ok(EquilibriumResult::NonConverged(eq))
        }
        CutOutcome::Infeasible => Ok(EquilibriumResult::Infeasible { cut_rounds: sol.rounds }),
        CutOutcome::Unbounded => {
            Err(Error::Numerical("basis-restricted program reported unbounded".to_string()))
        }
    }
}

/// Inverse standard normal CDF on (0, 1), by the rational approximation
/// of Wichura's algorithm AS 241 (PPND16); absolute error well below
/// the 1e-8 the chance margins need.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Input(format!("quantile argument must lie in (0, 1), got {p}")));
    }
    const A: [f64; 8] = [
        3.387_132_872_796_366_608e0,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 7] = [
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34e0,
        4.630_337_846_156_545_295_9e0,
        5.769_497_221_460_691_405_5e0,
        3.647_848_324_763_204_605_04e0,
        1.270_458_252_452_368_382_58e0,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 7] = [
        2.053_191_626_637_758_821_87e0,
        1.676_384_830_183_803_849_4e0,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2e0,
        5.463_784_911_164_114_369_9e0,
        1.784_826_539_917_291_335_8e0,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 6] = [
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-6,
        1.421_511_758_316_445_888_7e-15,
    ];
    let q = p - 0.5;
    let x = if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        q * poly(&A, r) / poly_one(&B, r)
    } else {
        let mut r = if q < 0.0 { p } else { 1.0 - p };
        r = (-r.ln()).sqrt();
        let x = if r <= 5.0 {
            let r = r - 1.6;
            poly(&C, r) / poly_one(&D, r)
        } else {
            let r = r - 5.0;
            poly(&E, r) / poly_one(&F, r)
        };
        if q < 0.0 {
            -x
        } else {
            x
        }
    };
    Ok(x)
}

fn poly(coeffs: &[f64], r: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c)
}

/// Denominator polynomials have an implicit leading 1.
fn poly_one(coeffs: &[f64], r: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c) * r + 1.0
}

// Shared plumbing.

fn resolve_weights(game: &NormalFormGame, weights: Option<&[f64]>) -> Result<Vec<f64>> {
    match weights {
        None => Ok(vec![1.0; game.num_players()]),
        Some(w) => {
            if w.len() != game.num_players() {
                return Err(Error::Input(format!(
                    "weight vector has {} entries, game has {} players",
                    w.len(),
                    game.num_players()
                )));
            }
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::Input("welfare weights must be finite and >= 0".to_string()));
            }
            Ok(w.to_vec())
        }
    }
}

fn check_solve_cap(game: &NormalFormGame) -> Result<()> {
    if game.joint_count() > DEFAULT_SOLVE_CAP {
        return Err(Error::Size(format!(
            "{} joint actions exceeds the solver cap {DEFAULT_SOLVE_CAP}",
            game.joint_count()
        )));
    }
    Ok(())
}

fn welfare_coeffs(game: &NormalFormGame, w: &[f64]) -> Vec<f64> {
    (0..game.joint_count())
        .map(|idx| (0..game.num_players()).map(|p| w[p] * game.utility(p, idx)).sum())
        .collect()
}

/// All (player, recommendation, alternative) triples in canonical order.
fn deviation_triples(game: &NormalFormGame) -> Vec<(usize, usize, usize)> {
    let mut triples = Vec::new();
    for player in 0..game.num_players() {
        for rec in 0..game.num_actions(player) {
            for alt in 0..game.num_actions(player) {
                if alt != rec {
                    triples.push((player, rec, alt));
                }
            }
        }
    }
    triples
}

/// Nonzero coefficients of one deviation-gain row: pairs of joint index
/// into the `rec` slice and `u_i(rec, ctx) - u_i(alt, ctx)`.
fn slice_coeffs(game: &NormalFormGame, player: usize, rec: usize, alt: usize) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let stride: usize = (player + 1..game.num_players()).map(|p| game.num_actions(p)).product();
    for idx in 0..game.joint_count() {
        if game.digit(idx, player) == rec {
            let alt_idx = idx - rec * stride + alt * stride;
            out.push((idx, game.utility(player, idx) - game.utility(player, alt_idx)));
        }
    }
    out
}

fn margin_constraints(game: &NormalFormGame, noise: &NoiseModel) -> Vec<ConcaveConstraint> {
    let mut constraints = Vec::new();
    for (player, rec, alt) in deviation_triples(game) {
        let entries = slice_coeffs(game, player, rec, alt);
        let scale = noise.quantile() * noise.sigma()[player] * 2.0f64.sqrt();
        let dim = game.joint_count();
        constraints.push(ConcaveConstraint::new(move |z: &[f64]| {
            let mut nominal = 0.0;
            let mut sq = 0.0;
            for (idx, c) in &entries {
                nominal += z[*idx] * c;
                sq += z[*idx] * z[*idx];
            }
            let norm = sq.sqrt();
            let g = nominal - scale * norm;
            let mut grad = vec![0.0; dim];
            for (idx, c) in &entries {
                grad[*idx] = if norm < 1e-14 { *c } else { c - scale * z[*idx] / norm };
            }
            (g, grad)
        }));
    }
    constraints
}

fn min_margin_ccce(game: &NormalFormGame, noise: &NoiseModel, z: &JointDistribution) -> Result<f64> {
    let mut min = f64::INFINITY;
    for (player, rec, alt) in deviation_triples(game) {
        min = min.min(ccce_margin(game, z, noise, player, rec, alt)?);
    }
    Ok(min)
}

fn assemble_hull_point(basis: &NashBasis, lambda: &[f64]) -> Result<JointDistribution> {
    let n = basis.members()[0].len();
    let mut z = vec![0.0; n];
    for (l, member) in lambda.iter().zip(basis.members()) {
        for (slot, p) in z.iter_mut().zip(member.probs()) {
            *slot += l * p;
        }
    }
    let mass: f64 = z.iter().sum();
    for slot in z.iter_mut() {
        *slot /= mass;
    }
    JointDistribution::new(z)
}

fn finish(
    game: &NormalFormGame,
    w: &[f64],
    x: Vec<f64>,
    cut_rounds: usize,
    basis_weights: Option<Vec<f64>>,
) -> Result<Equilibrium> {
    finish_with_z(game, w, JointDistribution::new(x)?, cut_rounds, basis_weights)
}

fn finish_with_z(
    game: &NormalFormGame,
    w: &[f64],
    z: JointDistribution,
    cut_rounds: usize,
    basis_weights: Option<Vec<f64>>,
) -> Result<Equilibrium> {
    let per_player_payoffs: Vec<f64> =
        (0..game.num_players()).map(|p| game.expected_utility(&z, p)).collect::<Result<_>>()?;
    let welfare = per_player_payoffs.iter().zip(w).map(|(u, w)| u * w).sum();
    let mut min_margin = f64::INFINITY;
    for (player, rec, alt) in deviation_triples(game) {
        min_margin = min_margin.min(game.deviation_gain(&z, player, rec, alt)?);
    }
    Ok(Equilibrium { z, welfare, per_player_payoffs, min_margin, cut_rounds, basis_weights })
}

fn finish_ccce(
    game: &NormalFormGame,
    noise: &NoiseModel,
    w: &[f64],
    x: Vec<f64>,
    cut_rounds: usize,
    basis_weights: Option<Vec<f64>>,
) -> Result<Equilibrium> {
    let mut eq = finish(game, w, x, cut_rounds, basis_weights)?;
    eq.min_margin = min_margin_ccce(game, noise, &eq.z)?;
    Ok(eq)
}
