//! Nash equilibrium enumeration: exhaustive scan for pure profiles and
//! support enumeration for two-player mixed profiles.

use super::{JointDistribution, JointProfile, MixedProfile, NormalFormGame};
use crate::{Error, Result};

/// Maximum per-player action count for two-player support enumeration;
/// the support-pair loop is exponential in this.
pub const MIXED_ENUM_MAX_ACTIONS: usize = 8;

/// Numerical acceptance thresholds for support enumeration. Candidates
/// must satisfy the indifference system to `RESIDUAL_TOL` and may go
/// negative by at most `NEG_TOL` before clamping; duplicates within
/// `DEDUP_TOL` in the sup norm are dropped.
const RESIDUAL_TOL: f64 = 1e-8;
const NEG_TOL: f64 = 1e-9;
const DEDUP_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-11;

/// All pure Nash profiles, in ascending joint-index order. A profile
/// qualifies when no player has a strictly improving unilateral
/// deviation (weak Nash are kept).
pub fn enumerate_pure_nash(game: &NormalFormGame, cap: usize) -> Result<Vec<JointProfile>> {
    if game.joint_count() > cap {
        return Err(Error::Size(format!(
            "{} joint actions exceeds enumeration cap {cap}",
            game.joint_count()
        )));
    }
    let mut found = Vec::new();
    'profiles: for idx in 0..game.joint_count() {
        for player in 0..game.num_players() {
            let cur = game.digit(idx, player);
            let base = idx - cur * stride(game, player);
            let here = game.utility(player, idx);
            for dev in 0..game.num_actions(player) {
                if dev != cur && game.utility(player, base + dev * stride(game, player)) > here {
                    continue 'profiles;
                }
            }
        }
        found.push(game.profile_of_index(idx)?);
    }
    Ok(found)
}

fn stride(game: &NormalFormGame, player: usize) -> usize {
    let mut s = 1;
    for p in (player + 1)..game.num_players() {
        s *= game.num_actions(p);
    }
    s
}

/// All mixed Nash equilibria of a two-player game found by support
/// enumeration, pure equilibria included as singleton supports.
///
/// Every support pair is tried, the per-player indifference systems are
/// solved (least squares when the pair is not square), and candidates
/// are kept only if they reproduce the indifference equations, stay
/// nonnegative, and make every off-support action weakly worse.
/// Degenerate games with equilibrium continua yield only the isolated
/// representatives the linear solves produce.
pub fn enumerate_mixed_nash_2p(game: &NormalFormGame) -> Result<Vec<MixedProfile>> {
    if game.num_players() != 2 {
        return Err(Error::Unsupported(format!(
            "mixed enumeration handles exactly 2 players, got {}",
            game.num_players()
        )));
    }
    let (m1, m2) = (game.num_actions(0), game.num_actions(1));
    if m1 > MIXED_ENUM_MAX_ACTIONS || m2 > MIXED_ENUM_MAX_ACTIONS {
        return Err(Error::Size(format!(
            "support enumeration capped at {MIXED_ENUM_MAX_ACTIONS} actions per player, got {m1}x{m2}"
        )));
    }
    let u1 = |a: usize, b: usize| game.utility(0, a * m2 + b);
    let u2 = |a: usize, b: usize| game.utility(1, a * m2 + b);

    let mut found: Vec<MixedProfile> = Vec::new();
    for mask1 in 1u32..(1 << m1) {
        let s1 = bits(mask1, m1);
        for mask2 in 1u32..(1 << m2) {
            let s2 = bits(mask2, m2);
            // q over s2 makes player 0 indifferent across s1; p over s1
            // makes player 1 indifferent across s2.
            let Some((q, v1)) = indifferent_mixture(&s1, &s2, &|a, b| u1(a, b)) else {
                continue;
            };
            let Some((p, v2)) = indifferent_mixture(&s2, &s1, &|b, a| u2(a, b)) else {
                continue;
            };
            let p_full = expand(&p, &s1, m1);
            let q_full = expand(&q, &s2, m2);
            // Off-support actions must not beat the support value.
            let br1 = (0..m1)
                .all(|a| (0..m2).map(|b| u1(a, b) * q_full[b]).sum::<f64>() <= v1 + RESIDUAL_TOL);
            let br2 = (0..m2)
                .all(|b| (0..m1).map(|a| u2(a, b) * p_full[a]).sum::<f64>() <= v2 + RESIDUAL_TOL);
            if !(br1 && br2) {
                continue;
            }
            let candidate = MixedProfile::new(vec![p_full, q_full])?;
            let duplicate = found.iter().any(|other| {
                candidate
                    .weights()
                    .iter()
                    .flatten()
                    .zip(other.weights().iter().flatten())
                    .all(|(a, b)| (a - b).abs() <= DEDUP_TOL)
            });
            if !duplicate {
                found.push(candidate);
            }
        }
    }
    Ok(found)
}

fn bits(mask: u32, m: usize) -> Vec<usize> {
    (0..m).filter(|a| mask & (1 << a) != 0).collect()
}

/// Lifts a support-indexed mixture to a full, clamped, exactly
/// normalized action vector.
fn expand(weights: &[f64], support: &[usize], m: usize) -> Vec<f64> {
    let mut full = vec![0.0; m];
    for (&a, &w) in support.iter().zip(weights) {
        full[a] = w.max(0.0);
    }
    let mass: f64 = full.iter().sum();
    for w in full.iter_mut() {
        *w /= mass;
    }
    full
}

/// Solves for a mixture over `mix_support` (plus the common payoff `v`)
/// that makes every action in `indiff_support` yield the same payoff,
/// where `pay(i, j)` is the payoff of indifferent action `i` against
/// mixing action `j`. Returns `None` when the system is singular,
/// inconsistent beyond tolerance, or leaves the simplex.
fn indifferent_mixture(
    indiff_support: &[usize],
    mix_support: &[usize],
    pay: &dyn Fn(usize, usize) -> f64,
) -> Option<(Vec<f64>, f64)> {
    let rows = indiff_support.len() + 1;
    let cols = mix_support.len() + 1;
    let mut a = vec![vec![0.0; cols]; rows];
    let mut b = vec![0.0; rows];
    for (r, &ia) in indiff_support.iter().enumerate() {
        for (c, &ja) in mix_support.iter().enumerate() {
            a[r][c] = pay(ia, ja);
        }
        a[r][cols - 1] = -1.0;
    }
    for c in 0..mix_support.len() {
        a[rows - 1][c] = 1.0;
    }
    b[rows - 1] = 1.0;

    let x = if rows == cols {
        solve_square(a.clone(), b.clone())?
    } else {
        solve_least_squares(&a, &b)?
    };
    // The least-squares path can return non-solutions; check the
    // original equations either way.
    for r in 0..rows {
        let lhs: f64 = a[r].iter().zip(&x).map(|(c, v)| c * v).sum();
        if (lhs - b[r]).abs() > RESIDUAL_TOL {
            return None;
        }
    }
    let mixture = &x[..mix_support.len()];
    if mixture.iter().any(|&w| w < -NEG_TOL) {
        return None;
    }
    Some((mixture.to_vec(), x[cols - 1]))
}

/// Gaussian elimination with partial pivoting on a square system.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite")
        })?;
        if a[pivot_row][col].abs() < PIVOT_TOL {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Least squares via the normal equations; adequate for the tiny,
/// well-scaled systems support enumeration produces.
fn solve_least_squares(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let rows = a.len();
    let cols = a[0].len();
    let mut ata = vec![vec![0.0; cols]; cols];
    let mut atb = vec![0.0; cols];
    for i in 0..cols {
        for j in 0..cols {
            ata[i][j] = (0..rows).map(|r| a[r][i] * a[r][j]).sum();
        }
        atb[i] = (0..rows).map(|r| a[r][i] * b[r]).sum();
    }
    solve_square(ata, atb)
}

/// The joint distribution induced by independent play of a mixed
/// profile: `z(a) = prod_i p_i(a_i)`.
pub fn product_distribution(
    profile: &MixedProfile,
    game: &NormalFormGame,
) -> Result<JointDistribution> {
    let n = game.num_players();
    if profile.weights().len() != n {
        return Err(Error::Input(format!(
            "mixed profile covers {} players, game has {n}",
            profile.weights().len()
        )));
    }
    for (p, row) in profile.weights().iter().enumerate() {
        if row.len() != game.num_actions(p) {
            return Err(Error::Input(format!(
                "player {p} mixture has {} entries, expected {}",
                row.len(),
                game.num_actions(p)
            )));
        }
    }
    let mut z = vec![0.0; game.joint_count()];
    for (idx, slot) in z.iter_mut().enumerate() {
        let mut prob = 1.0;
        for p in 0..n {
            prob *= profile.weights()[p][game.digit(idx, p)];
        }
        *slot = prob;
    }
    // Per-player rounding can compound; renormalizing keeps the mass
    // invariant exact (and is the identity when the mass is already 1).
    let mass: f64 = z.iter().sum();
    for slot in z.iter_mut() {
        *slot /= mass;
    }
    JointDistribution::new(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::library::*;
    use crate::game::DEFAULT_ENUM_CAP;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn profiles(list: &[JointProfile]) -> Vec<Vec<usize>> {
        list.iter().map(|p| p.actions().to_vec()).collect()
    }

    #[test]
    fn pure_nash_hand_cases() {
        let pd = prisoners_dilemma();
        assert_eq!(profiles(&enumerate_pure_nash(&pd, DEFAULT_ENUM_CAP).unwrap()), vec![vec![1, 1]]);

        let mp = matching_pennies();
        assert!(enumerate_pure_nash(&mp, DEFAULT_ENUM_CAP).unwrap().is_empty());

        let ch = chicken();
        assert_eq!(
            profiles(&enumerate_pure_nash(&ch, DEFAULT_ENUM_CAP).unwrap()),
            vec![vec![0, 1], vec![1, 0]]
        );

        let co = pure_coordination();
        assert_eq!(
            profiles(&enumerate_pure_nash(&co, DEFAULT_ENUM_CAP).unwrap()),
            vec![vec![0, 0], vec![1, 1]]
        );
    }

    #[test]
    fn pure_nash_respects_cap() {
        let pd = prisoners_dilemma();
        assert!(matches!(enumerate_pure_nash(&pd, 3), Err(crate::Error::Size(_))));
    }

    #[test]
    fn pure_nash_point_masses_pass_verify_at_zero_tolerance() {
        for game in [prisoners_dilemma(), chicken(), pure_coordination()] {
            for nash in enumerate_pure_nash(&game, DEFAULT_ENUM_CAP).unwrap() {
                let idx = game.joint_index(&nash).unwrap();
                let z = JointDistribution::point_mass(idx, game.joint_count()).unwrap();
                assert!(game.verify_ce(&z, 0.0).unwrap().pass);
            }
        }
    }

    #[test]
    fn mixed_nash_matching_pennies() {
        let mp = matching_pennies();
        let eqs = enumerate_mixed_nash_2p(&mp).unwrap();
        assert_eq!(eqs.len(), 1);
        for row in eqs[0].weights() {
            assert_abs_diff_eq!(row[0], 0.5, epsilon = 1e-9);
            assert_abs_diff_eq!(row[1], 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn mixed_nash_coordination_has_three() {
        let co = pure_coordination();
        let eqs = enumerate_mixed_nash_2p(&co).unwrap();
        assert_eq!(eqs.len(), 3);
        let mixed = eqs
            .iter()
            .find(|e| e.weights()[0][0] > 0.0 && e.weights()[0][0] < 1.0)
            .expect("interior equilibrium");
        for row in mixed.weights() {
            assert_abs_diff_eq!(row[0], 1.0 / 3.0, epsilon = 1e-9);
            assert_abs_diff_eq!(row[1], 2.0 / 3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn mixed_nash_prisoners_dilemma_is_defect_only() {
        let pd = prisoners_dilemma();
        let eqs = enumerate_mixed_nash_2p(&pd).unwrap();
        assert_eq!(eqs.len(), 1);
        assert_abs_diff_eq!(eqs[0].weights()[0][1], 1.0);
        assert_abs_diff_eq!(eqs[0].weights()[1][1], 1.0);
    }

    #[test]
    fn mixed_nash_rejects_wrong_shapes() {
        let g3 = crate::game::NormalFormGame::from_payoffs(&[2, 2, 2], vec![vec![0.0; 8]; 3]).unwrap();
        assert!(matches!(enumerate_mixed_nash_2p(&g3), Err(crate::Error::Unsupported(_))));

        let wide = crate::game::NormalFormGame::from_payoffs(&[9, 2], vec![vec![0.0; 18]; 2]).unwrap();
        assert!(matches!(enumerate_mixed_nash_2p(&wide), Err(crate::Error::Size(_))));
    }

    #[test]
    fn mixed_nash_support_actions_are_optimal_on_random_games() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let (m1, m2) = (rng.gen_range(2..=4), rng.gen_range(2..=4));
            let utils: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..m1 * m2).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let game = crate::game::NormalFormGame::from_payoffs(&[m1, m2], utils).unwrap();
            for eq in enumerate_mixed_nash_2p(&game).unwrap() {
                let p = &eq.weights()[0];
                let q = &eq.weights()[1];
                let payoff1 = |a: usize| -> f64 {
                    (0..m2).map(|b| game.utility(0, a * m2 + b) * q[b]).sum()
                };
                let payoff2 = |b: usize| -> f64 {
                    (0..m1).map(|a| game.utility(1, a * m2 + b) * p[a]).sum()
                };
                let best1 = (0..m1).map(payoff1).fold(f64::NEG_INFINITY, f64::max);
                let best2 = (0..m2).map(payoff2).fold(f64::NEG_INFINITY, f64::max);
                for a in 0..m1 {
                    if p[a] > 1e-9 {
                        assert_abs_diff_eq!(payoff1(a), best1, epsilon = 1e-7);
                    }
                }
                for b in 0..m2 {
                    if q[b] > 1e-9 {
                        assert_abs_diff_eq!(payoff2(b), best2, epsilon = 1e-7);
                    }
                }
            }
        }
    }

    #[test]
    fn product_distribution_hand_cases() {
        let mp = matching_pennies();
        let half = MixedProfile::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let z = product_distribution(&half, &mp).unwrap();
        for &p in z.probs() {
            assert_abs_diff_eq!(p, 0.25);
        }

        let point = MixedProfile::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let z = product_distribution(&point, &mp).unwrap();
        assert_eq!(z.probs(), &[0.0, 0.0, 1.0, 0.0]);

        let bad = MixedProfile::new(vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0]]).unwrap();
        assert!(product_distribution(&bad, &mp).is_err());
    }

    #[test]
    fn product_of_mixed_nash_passes_verify_ce() {
        let mp = matching_pennies();
        for eq in enumerate_mixed_nash_2p(&mp).unwrap() {
            let z = product_distribution(&eq, &mp).unwrap();
            assert!(mp.verify_ce(&z, 1e-8).unwrap().pass);
        }
        let co = pure_coordination();
        for eq in enumerate_mixed_nash_2p(&co).unwrap() {
            let z = product_distribution(&eq, &co).unwrap();
            assert!(co.verify_ce(&z, 1e-8).unwrap().pass);
        }
    }
}
