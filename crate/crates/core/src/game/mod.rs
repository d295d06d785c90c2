//! Finite normal-form games with flat row-major joint-action indexing.
//!
//! A joint action is stored as a single index with player 0 as the most
//! significant digit, so the utility tensors are plain `Vec<f64>` and
//! every solver in the crate can treat a correlated strategy as a dense
//! probability vector over joint indices.

use crate::{Error, Result};

mod nash;

pub use nash::{enumerate_mixed_nash_2p, enumerate_pure_nash, product_distribution};

/// Entries of a distribution may round slightly negative; anything in
/// `[-PROB_CLAMP, 0)` is clamped to zero, anything below is rejected.
pub const PROB_CLAMP: f64 = 1e-12;

/// Absolute tolerance on the total mass of a distribution.
pub const MASS_TOL: f64 = 1e-9;

/// Default cap on the number of joint actions enumerated by the pure
/// Nash scan.
pub const DEFAULT_ENUM_CAP: usize = 1_000_000;

/// A finite n-player game in normal form, n >= 2.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormGame {
    players: Vec<String>,
    actions: Vec<Vec<String>>,
    /// One flat tensor per player, indexed by joint index.
    utilities: Vec<Vec<f64>>,
    /// Mixed-radix strides; `strides[0]` is the largest.
    strides: Vec<usize>,
    joint_count: usize,
}

impl NormalFormGame {
    /// Builds a game from player labels, per-player action labels, and
    /// per-player flat utility tensors in row-major joint order.
    pub fn new(
        players: Vec<String>,
        actions: Vec<Vec<String>>,
        utilities: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = players.len();
        if n < 2 {
            return Err(Error::Input(format!("need at least 2 players, got {n}")));
        }
        if actions.len() != n {
            return Err(Error::Input(format!(
                "expected {n} action-label lists, got {}",
                actions.len()
            )));
        }
        let mut joint_count: usize = 1;
        for (p, labels) in actions.iter().enumerate() {
            if labels.is_empty() {
                return Err(Error::Input(format!("player {p} has no actions")));
            }
            joint_count = joint_count.checked_mul(labels.len()).ok_or_else(|| {
                Error::Size("joint action space overflows usize".to_string())
            })?;
        }
        if utilities.len() != n {
            return Err(Error::Input(format!(
                "expected {n} utility tensors, got {}",
                utilities.len()
            )));
        }
        for (p, tensor) in utilities.iter().enumerate() {
            if tensor.len() != joint_count {
                return Err(Error::Input(format!(
                    "player {p} utility tensor has {} entries, expected {joint_count}",
                    tensor.len()
                )));
            }
            if let Some(bad) = tensor.iter().find(|u| !u.is_finite()) {
                return Err(Error::Input(format!(
                    "player {p} utility tensor contains non-finite entry {bad}"
                )));
            }
        }
        let mut strides = vec![1usize; n];
        for p in (0..n - 1).rev() {
            strides[p] = strides[p + 1] * actions[p + 1].len();
        }
        Ok(Self { players, actions, utilities, strides, joint_count })
    }

    /// Convenience constructor with generated labels `p0, p1, ...` and
    /// `a0, a1, ...`.
    pub fn from_payoffs(action_counts: &[usize], utilities: Vec<Vec<f64>>) -> Result<Self> {
        let players = (0..action_counts.len()).map(|p| format!("p{p}")).collect();
        let actions = action_counts
            .iter()
            .map(|&m| (0..m).map(|a| format!("a{a}")).collect())
            .collect();
        Self::new(players, actions, utilities)
    }

    pub fn num_players(&self) -> usize {
        self.players.len()
    }

    pub fn num_actions(&self, player: usize) -> usize {
        self.actions[player].len()
    }

    pub fn joint_count(&self) -> usize {
        self.joint_count
    }

    pub fn player_names(&self) -> &[String] {
        &self.players
    }

    pub fn action_labels(&self) -> &[Vec<String>] {
        &self.actions
    }

    pub fn utility_tensor(&self, player: usize) -> &[f64] {
        &self.utilities[player]
    }

    pub fn utility(&self, player: usize, joint: usize) -> f64 {
        self.utilities[player][joint]
    }

    /// Flat index of a joint profile, player 0 most significant.
    pub fn joint_index(&self, profile: &JointProfile) -> Result<usize> {
        let n = self.num_players();
        if profile.actions().len() != n {
            return Err(Error::Input(format!(
                "profile has {} entries for a {n}-player game",
                profile.actions().len()
            )));
        }
        let mut idx = 0usize;
        for (p, &a) in profile.actions().iter().enumerate() {
            let m = self.num_actions(p);
            if a >= m {
                return Err(Error::Input(format!(
                    "action {a} out of range for player {p} with {m} actions"
                )));
            }
            idx += a * self.strides[p];
        }
        Ok(idx)
    }

    /// Inverse of [`joint_index`](Self::joint_index).
    pub fn profile_of_index(&self, joint: usize) -> Result<JointProfile> {
        if joint >= self.joint_count {
            return Err(Error::Input(format!(
                "joint index {joint} out of range ({} joint actions)",
                self.joint_count
            )));
        }
        let actions = (0..self.num_players()).map(|p| self.digit(joint, p)).collect();
        Ok(JointProfile::new(actions))
    }

    /// Player `p`'s action inside joint index `joint`.
    pub fn digit(&self, joint: usize, player: usize) -> usize {
        (joint / self.strides[player]) % self.num_actions(player)
    }

    /// Expected utility of `player` under the correlated strategy `z`.
    pub fn expected_utility(&self, z: &JointDistribution, player: usize) -> Result<f64> {
        self.check_distribution(z)?;
        self.check_player(player)?;
        let u = &self.utilities[player];
        Ok(z.probs().iter().zip(u).map(|(p, u)| p * u).sum())
    }

    /// Expected gain of `player` from following recommendation `rec`
    /// instead of unilaterally switching to `alt`, unnormalized by the
    /// marginal mass of `rec`, so the value is linear in `z` and zero
    /// whenever `rec` has no mass.
    pub fn deviation_gain(
        &self,
        z: &JointDistribution,
        player: usize,
        rec: usize,
        alt: usize,
    ) -> Result<f64> {
        self.check_distribution(z)?;
        self.check_player(player)?;
        self.check_action(player, rec)?;
        self.check_action(player, alt)?;
        let stride = self.strides[player];
        let u = &self.utilities[player];
        let mut gain = 0.0;
        for idx in 0..self.joint_count {
            if self.digit(idx, player) != rec {
                continue;
            }
            let alt_idx = idx - rec * stride + alt * stride;
            gain += z.probs()[idx] * (u[idx] - u[alt_idx]);
        }
        Ok(gain)
    }

    /// Checks every deviation constraint of the correlated-equilibrium
    /// system; `z` passes iff the minimum gain is at least `-tol`.
    pub fn verify_ce(&self, z: &JointDistribution, tol: f64) -> Result<CeReport> {
        if !tol.is_finite() || tol < 0.0 {
            return Err(Error::Input(format!("tolerance must be finite and >= 0, got {tol}")));
        }
        let mut min_gain = f64::INFINITY;
        let mut worst = None;
        let mut checked = 0usize;
        for player in 0..self.num_players() {
            for rec in 0..self.num_actions(player) {
                for alt in 0..self.num_actions(player) {
                    if alt == rec {
                        continue;
                    }
                    let gain = self.deviation_gain(z, player, rec, alt)?;
                    checked += 1;
                    if gain < min_gain {
                        min_gain = gain;
                        worst = Some(DeviationConstraint { player, recommended: rec, alternative: alt, gain });
                    }
                }
            }
        }
        Ok(CeReport { pass: min_gain >= -tol, min_gain, worst, constraints_checked: checked })
    }

    fn check_player(&self, player: usize) -> Result<()> {
        if player >= self.num_players() {
            return Err(Error::Input(format!(
                "player {player} out of range ({} players)",
                self.num_players()
            )));
        }
        Ok(())
    }

    fn check_action(&self, player: usize, action: usize) -> Result<()> {
        if action >= self.num_actions(player) {
            return Err(Error::Input(format!(
                "action {action} out of range for player {player}"
            )));
        }
        Ok(())
    }

    fn check_distribution(&self, z: &JointDistribution) -> Result<()> {
        if z.len() != self.joint_count {
            return Err(Error::Input(format!(
                "distribution has {} entries, game has {} joint actions",
                z.len(),
                self.joint_count
            )));
        }
        Ok(())
    }
}

/// One action index per player.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointProfile(Vec<usize>);

impl JointProfile {
    pub fn new(actions: Vec<usize>) -> Self {
        Self(actions)
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }
}

/// A probability distribution over joint actions (a correlated
/// strategy), stored dense over joint indices.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution(Vec<f64>);

impl JointDistribution {
    /// Validates and clamps: entries must be finite and at least
    /// `-PROB_CLAMP` (slightly negative entries become zero), and the
    /// total mass must be within `MASS_TOL` of one.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Input("distribution must have at least one entry".to_string()));
        }
        let mut clamped = probs;
        for p in clamped.iter_mut() {
            if !p.is_finite() {
                return Err(Error::Input(format!("distribution entry {p} is not finite")));
            }
            if *p < -PROB_CLAMP {
                return Err(Error::Input(format!("distribution entry {p} is negative")));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let mass: f64 = clamped.iter().sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Input(format!("distribution mass {mass} is not 1")));
        }
        Ok(Self(clamped))
    }

    pub fn point_mass(index: usize, len: usize) -> Result<Self> {
        if index >= len {
            return Err(Error::Input(format!("point-mass index {index} out of range {len}")));
        }
        let mut probs = vec![0.0; len];
        probs[index] = 1.0;
        Ok(Self(probs))
    }

    pub fn uniform(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Input("distribution must have at least one entry".to_string()));
        }
        Ok(Self(vec![1.0 / len as f64; len]))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One independent mixed strategy per player.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedProfile(Vec<Vec<f64>>);

impl MixedProfile {
    /// Each per-player vector is validated and clamped like a
    /// [`JointDistribution`].
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Input("mixed profile must cover at least one player".to_string()));
        }
        let mut rows = weights;
        for (p, row) in rows.iter_mut().enumerate() {
            if row.is_empty() {
                return Err(Error::Input(format!("player {p} has an empty mixture")));
            }
            for w in row.iter_mut() {
                if !w.is_finite() {
                    return Err(Error::Input(format!("player {p} mixture entry {w} is not finite")));
                }
                if *w < -PROB_CLAMP {
                    return Err(Error::Input(format!("player {p} mixture entry {w} is negative")));
                }
                if *w < 0.0 {
                    *w = 0.0;
                }
            }
            let mass: f64 = row.iter().sum();
            if (mass - 1.0).abs() > MASS_TOL {
                return Err(Error::Input(format!("player {p} mixture mass {mass} is not 1")));
            }
        }
        Ok(Self(rows))
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.0
    }
}

/// One deviation constraint of the correlated-equilibrium system.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationConstraint {
    pub player: usize,
    pub recommended: usize,
    pub alternative: usize,
    pub gain: f64,
}

/// Result of checking every deviation constraint against a tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct CeReport {
    pub pass: bool,
    /// Minimum deviation gain over all constraints; `+inf` when the
    /// game has no deviation constraints at all.
    pub min_gain: f64,
    /// The most violated (or tightest) constraint, if any exist.
    pub worst: Option<DeviationConstraint>,
    pub constraints_checked: usize,
}

/// Canonical two-player teaching games used throughout the test suites
/// and the CLI documentation.
pub mod library {
    use super::NormalFormGame;

    /// Prisoner's Dilemma, actions (C, D), row payoffs CC=3 CD=0 DC=5 DD=1.
    pub fn prisoners_dilemma() -> NormalFormGame {
        NormalFormGame::new(
            vec!["row".into(), "col".into()],
            vec![vec!["C".into(), "D".into()], vec!["C".into(), "D".into()]],
            vec![vec![3.0, 0.0, 5.0, 1.0], vec![3.0, 5.0, 0.0, 1.0]],
        )
        .expect("static game")
    }

    /// Matching Pennies, actions (H, T), zero-sum.
    pub fn matching_pennies() -> NormalFormGame {
        NormalFormGame::new(
            vec!["row".into(), "col".into()],
            vec![vec!["H".into(), "T".into()], vec!["H".into(), "T".into()]],
            vec![vec![1.0, -1.0, -1.0, 1.0], vec![-1.0, 1.0, 1.0, -1.0]],
        )
        .expect("static game")
    }

    /// Chicken, actions (C, D), symmetric with row payoffs CC=6 CD=2 DC=7 DD=0.
    pub fn chicken() -> NormalFormGame {
        NormalFormGame::new(
            vec!["row".into(), "col".into()],
            vec![vec!["C".into(), "D".into()], vec!["C".into(), "D".into()]],
            vec![vec![6.0, 2.0, 7.0, 0.0], vec![6.0, 7.0, 2.0, 0.0]],
        )
        .expect("static game")
    }

    /// Pure coordination, actions (A, B), payoff 2 on (A,A), 1 on (B,B).
    pub fn pure_coordination() -> NormalFormGame {
        NormalFormGame::new(
            vec!["row".into(), "col".into()],
            vec![vec!["A".into(), "B".into()], vec!["A".into(), "B".into()]],
            vec![vec![2.0, 0.0, 0.0, 1.0], vec![2.0, 0.0, 0.0, 1.0]],
        )
        .expect("static game")
    }
}

#[cfg(test)]
mod tests {
    use super::library::*;
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Brute-force deviation gain via tuple enumeration, indexing by
    /// Horner's rule instead of precomputed strides.
    fn oracle_gain(
        game: &NormalFormGame,
        z: &JointDistribution,
        player: usize,
        rec: usize,
        alt: usize,
    ) -> f64 {
        let n = game.num_players();
        let mut profile = vec![0usize; n];
        let mut gain = 0.0;
        loop {
            if profile[player] == rec {
                let mut dev = profile.clone();
                dev[player] = alt;
                let flat = |p: &[usize]| {
                    p.iter().enumerate().fold(0usize, |acc, (q, &a)| acc * game.num_actions(q) + a)
                };
                let idx = flat(&profile);
                gain += z.probs()[idx]
                    * (game.utility(player, idx) - game.utility(player, flat(&dev)));
            }
            // Odometer increment, least significant digit last.
            let mut p = n;
            loop {
                if p == 0 {
                    return gain;
                }
                p -= 1;
                profile[p] += 1;
                if profile[p] < game.num_actions(p) {
                    break;
                }
                profile[p] = 0;
            }
        }
    }

    fn dist(probs: &[f64]) -> JointDistribution {
        JointDistribution::new(probs.to_vec()).unwrap()
    }

    #[test]
    fn joint_index_round_trips_small_game() {
        let g = NormalFormGame::from_payoffs(&[2, 3, 2], vec![vec![0.0; 12]; 3]).unwrap();
        // Player 0 most significant: (1, 2, 0) -> 1*6 + 2*2 + 0 = 10.
        let p = JointProfile::new(vec![1, 2, 0]);
        assert_eq!(g.joint_index(&p).unwrap(), 10);
        assert_eq!(g.profile_of_index(10).unwrap(), p);
        for idx in 0..g.joint_count() {
            let prof = g.profile_of_index(idx).unwrap();
            assert_eq!(g.joint_index(&prof).unwrap(), idx);
        }
    }

    #[test]
    fn joint_index_rejects_out_of_range() {
        let g = library::prisoners_dilemma();
        let err = g.joint_index(&JointProfile::new(vec![0, 2])).unwrap_err();
        assert!(matches!(err, crate::Error::Input(_)));
        let err = g.joint_index(&JointProfile::new(vec![0])).unwrap_err();
        assert!(matches!(err, crate::Error::Input(_)));
    }

    #[test]
    fn expected_utility_matches_hand_values() {
        let mp = matching_pennies();
        let uni = JointDistribution::uniform(4).unwrap();
        assert_abs_diff_eq!(mp.expected_utility(&uni, 0).unwrap(), 0.0);
        assert_abs_diff_eq!(mp.expected_utility(&uni, 1).unwrap(), 0.0);

        let pd = prisoners_dilemma();
        let cc = JointDistribution::point_mass(0, 4).unwrap();
        assert_abs_diff_eq!(pd.expected_utility(&cc, 0).unwrap(), 3.0);
        assert_abs_diff_eq!(pd.expected_utility(&cc, 1).unwrap(), 3.0);

        let short = JointDistribution::uniform(2).unwrap();
        assert!(pd.expected_utility(&short, 0).is_err());
    }

    #[test]
    fn deviation_gain_matches_hand_values_and_oracle() {
        let pd = prisoners_dilemma();
        let cc = JointDistribution::point_mass(0, 4).unwrap();
        let g = pd.deviation_gain(&cc, 0, 0, 1).unwrap();
        assert_abs_diff_eq!(g, -2.0);
        assert_abs_diff_eq!(oracle_gain(&pd, &cc, 0, 0, 1), -2.0);

        let ch = chicken();
        let z = dist(&[0.5, 0.25, 0.25, 0.0]);
        let g = ch.deviation_gain(&z, 0, 0, 1).unwrap();
        assert_abs_diff_eq!(g, 0.0);
        assert_abs_diff_eq!(oracle_gain(&ch, &z, 0, 0, 1), 0.0);

        // Zero marginal mass on the recommendation makes the constraint vacuous.
        let dd = JointDistribution::point_mass(3, 4).unwrap();
        assert_abs_diff_eq!(pd.deviation_gain(&dd, 0, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn deviation_gain_agrees_with_oracle_on_random_games() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(2..=3);
            let counts: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=4)).collect();
            let joint: usize = counts.iter().product();
            let utils: Vec<Vec<f64>> =
                (0..n).map(|_| (0..joint).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let game = NormalFormGame::from_payoffs(&counts, utils).unwrap();
            let raw: Vec<f64> = (0..joint).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mass: f64 = raw.iter().sum();
            let z = JointDistribution::new(raw.iter().map(|p| p / mass).collect()).unwrap();
            for player in 0..n {
                for rec in 0..counts[player] {
                    for alt in 0..counts[player] {
                        let got = game.deviation_gain(&z, player, rec, alt).unwrap();
                        let want = oracle_gain(&game, &z, player, rec, alt);
                        assert_abs_diff_eq!(got, want, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn verify_ce_hand_cases() {
        let pd = prisoners_dilemma();
        let dd = JointDistribution::point_mass(3, 4).unwrap();
        let report = pd.verify_ce(&dd, 0.0).unwrap();
        assert!(report.pass);
        assert_abs_diff_eq!(report.min_gain, 0.0);
        assert_eq!(report.constraints_checked, 4);

        let ch = chicken();
        let z = dist(&[0.5, 0.25, 0.25, 0.0]);
        let report = ch.verify_ce(&z, 1e-9).unwrap();
        assert!(report.pass);
        assert_abs_diff_eq!(report.min_gain, 0.0, epsilon = 1e-12);

        let mp = matching_pennies();
        let hh = JointDistribution::point_mass(0, 4).unwrap();
        let report = mp.verify_ce(&hh, 1e-9).unwrap();
        assert!(!report.pass);
        let worst = report.worst.unwrap();
        assert_eq!((worst.player, worst.recommended, worst.alternative), (1, 0, 1));
        assert_abs_diff_eq!(worst.gain, -2.0);
    }

    #[test]
    fn distribution_clamps_and_validates() {
        let z = JointDistribution::new(vec![0.5, 0.5, -1e-13, 0.0]).unwrap();
        assert_eq!(z.probs()[2], 0.0);
        assert!(JointDistribution::new(vec![0.5, 0.5, -1e-6]).is_err());
        assert!(JointDistribution::new(vec![0.6, 0.6]).is_err());
        assert!(JointDistribution::new(vec![0.5, f64::NAN]).is_err());
        assert!(MixedProfile::new(vec![vec![0.5, 0.5], vec![1.0, 0.1]]).is_err());
    }

    proptest! {
        #[test]
        fn prop_joint_index_bijective(shape in proptest::collection::vec(1usize..5, 2..4)) {
            let joint: usize = shape.iter().product();
            let game = NormalFormGame::from_payoffs(&shape, vec![vec![0.0; joint]; shape.len()]).unwrap();
            let mut seen = vec![false; joint];
            for idx in 0..joint {
                let prof = game.profile_of_index(idx).unwrap();
                let back = game.joint_index(&prof).unwrap();
                prop_assert_eq!(back, idx);
                prop_assert!(!seen[idx]);
                seen[idx] = true;
            }
        }

        #[test]
        fn prop_deviation_gain_linear_in_z(
            raw_a in proptest::collection::vec(0.0f64..1.0, 4),
            raw_b in proptest::collection::vec(0.0f64..1.0, 4),
            lambda in 0.0f64..1.0,
        ) {
            let norm = |raw: &[f64]| {
                let mass: f64 = raw.iter().sum::<f64>() + 1e-9;
                JointDistribution::new(raw.iter().map(|p| (p + 1e-9 / 4.0) / mass).collect()).unwrap()
            };
            let za = norm(&raw_a);
            let zb = norm(&raw_b);
            let mix: Vec<f64> = za
                .probs()
                .iter()
                .zip(zb.probs())
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .collect();
            let zmix = JointDistribution::new(mix).unwrap();
            let game = chicken();
            for player in 0..2 {
                for rec in 0..2 {
                    for alt in 0..2 {
                        let ga = game.deviation_gain(&za, player, rec, alt).unwrap();
                        let gb = game.deviation_gain(&zb, player, rec, alt).unwrap();
                        let gm = game.deviation_gain(&zmix, player, rec, alt).unwrap();
                        prop_assert!((gm - (lambda * ga + (1.0 - lambda) * gb)).abs() <= 1e-10);
                    }
                }
            }
        }

        #[test]
        fn prop_convex_combination_of_ce_stays_ce(lambda in 0.0f64..1.0) {
            // Two known CE of Chicken; any convex combination must pass.
            let game = chicken();
            let za = dist(&[0.5, 0.25, 0.25, 0.0]);
            let zb = JointDistribution::point_mass(1, 4).unwrap();
            let mix: Vec<f64> = za
                .probs()
                .iter()
                .zip(zb.probs())
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .collect();
            let zmix = JointDistribution::new(mix).unwrap();
            prop_assert!(game.verify_ce(&zmix, 1e-9).unwrap().pass);
        }
    }
}
