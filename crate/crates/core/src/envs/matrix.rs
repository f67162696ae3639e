use crate::error::{Error, Result};

/// A one-shot two-player game given by its payoff table.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    /// `payoffs[a1][a2] = (r1, r2)`.
    pub payoffs: Vec<Vec<(f64, f64)>>,
}

type Cell = (f64, f64);

/// Two-by-two no-conflict games, (A,A) optimal, in the order
/// `[(A,A), (A,B), (B,A), (B,B)]`. Games 7-12 carry the (4,5) optimal payoff
/// and games 19-21 carry (5,5) so that the expected gradient under uniform
/// policies favors the optimum.
const NO_CONFLICT_2X2: [[Cell; 4]; 21] = [
    [(4., 4.), (3., 3.), (2., 2.), (1., 1.)],
    [(4., 4.), (3., 3.), (2., 1.), (2., 1.)],
    [(4., 4.), (3., 2.), (2., 3.), (1., 1.)],
    [(4., 4.), (3., 2.), (3., 2.), (1., 1.)],
    [(4., 4.), (3., 1.), (2., 1.), (1., 3.)],
    [(4., 4.), (3., 3.), (2., 1.), (1., 2.)],
    [(4., 5.), (3., 2.), (1., 1.), (1., 1.)],
    [(4., 5.), (3., 2.), (1., 1.), (2., 3.)],
    [(4., 5.), (3., 2.), (2., 3.), (1., 1.)],
    [(4., 5.), (3., 1.), (1., 1.), (2., 2.)],
    [(4., 5.), (3., 1.), (1., 1.), (2., 3.)],
    [(4., 5.), (3., 1.), (2., 3.), (2., 1.)],
    [(4., 4.), (2., 3.), (3., 1.), (1., 3.)],
    [(4., 4.), (2., 3.), (3., 1.), (2., 2.)],
    [(4., 4.), (2., 2.), (3., 1.), (1., 3.)],
    [(4., 4.), (2., 2.), (3., 2.), (1., 3.)],
    [(4., 4.), (3., 1.), (2., 2.), (1., 3.)],
    [(4., 4.), (2., 1.), (1., 2.), (3., 3.)],
    [(5., 5.), (1., 3.), (3., 1.), (2., 2.)],
    [(5., 5.), (1., 2.), (3., 1.), (2., 2.)],
    [(5., 5.), (1., 2.), (2., 1.), (3., 3.)],
];

const CLIMBING: [[f64; 3]; 3] = [[11., -3., 0.], [-3., 7., 0.], [0., 3., 2.]];
const PENALTY_K: f64 = 7.0;

impl MatrixGame {
    pub fn by_id(id: &str) -> Result<Self> {
        let game = match id {
            "intro" => Self::from_2x2([(12., 12.), (0., 6.), (6., 0.), (2., 2.)]),
            "climbing" => Self::shared(&CLIMBING),
            "penalty" => {
                Self::shared(&[[-PENALTY_K, 0., 10.], [0., 2., 0.], [10., 0., -PENALTY_K]])
            }
            _ => {
                let n: usize = id
                    .strip_prefix('g')
                    .and_then(|s| s.parse().ok())
                    .filter(|n| (1..=21).contains(n))
                    .ok_or_else(|| Error::invalid(format!("unknown game id {id:?}")))?;
                Self::from_2x2(NO_CONFLICT_2X2[n - 1])
            }
        };
        Ok(game)
    }

    fn from_2x2(cells: [Cell; 4]) -> Self {
        MatrixGame {
            payoffs: vec![vec![cells[0], cells[1]], vec![cells[2], cells[3]]],
        }
    }

    fn shared(table: &[[f64; 3]; 3]) -> Self {
        MatrixGame {
            payoffs: table
                .iter()
                .map(|row| row.iter().map(|&r| (r, r)).collect())
                .collect(),
        }
    }

    pub fn action_counts(&self) -> [usize; 2] {
        [self.payoffs.len(), self.payoffs[0].len()]
    }

    pub fn rewards(&self, a1: usize, a2: usize) -> [f64; 2] {
        let (r1, r2) = self.payoffs[a1][a2];
        [r1, r2]
    }

    /// Joint actions with the largest total reward.
    pub fn optimal_joint_actions(&self) -> Vec<(usize, usize)> {
        let total = |a: usize, b: usize| self.payoffs[a][b].0 + self.payoffs[a][b].1;
        let [k1, k2] = self.action_counts();
        let best = (0..k1)
            .flat_map(|a| (0..k2).map(move |b| (a, b)))
            .map(|(a, b)| total(a, b))
            .fold(f64::NEG_INFINITY, f64::max);
        (0..k1)
            .flat_map(|a| (0..k2).map(move |b| (a, b)))
            .filter(|&(a, b)| total(a, b) == best)
            .collect()
    }

    pub fn is_cooperative(&self) -> bool {
        self.payoffs.iter().flatten().all(|(a, b)| a == b)
    }
}

pub fn matrix_game_ids() -> Vec<String> {
    let mut ids: Vec<String> = (1..=21).map(|n| format!("g{n}")).collect();
    ids.extend(["intro", "climbing", "penalty"].map(String::from));
    ids
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_payoffs() {
        assert_eq!(MatrixGame::by_id("g1").unwrap().rewards(0, 0), [4., 4.]);
        let climbing = MatrixGame::by_id("climbing").unwrap();
        assert_eq!(climbing.rewards(0, 0), [11., 11.]);
        assert_eq!(climbing.rewards(0, 1), [-3., -3.]);
        assert_eq!(MatrixGame::by_id("intro").unwrap().rewards(0, 1), [0., 6.]);
        assert_eq!(
            MatrixGame::by_id("penalty").unwrap().rewards(0, 0),
            [-7., -7.]
        );
        assert_eq!(MatrixGame::by_id("g7").unwrap().rewards(0, 0), [4., 5.]);
        assert_eq!(MatrixGame::by_id("g20").unwrap().rewards(0, 0), [5., 5.]);
    }

    #[test]
    fn unknown_ids() {
        for id in ["g0", "g22", "gx", "", "foo"] {
            assert!(MatrixGame::by_id(id).is_err(), "{id}");
        }
    }

    #[test]
    fn no_conflict_games_have_unique_strict_optimum() {
        for n in 1..=21 {
            let g = MatrixGame::by_id(&format!("g{n}")).unwrap();
            assert_eq!(g.optimal_joint_actions(), vec![(0, 0)], "game {n}");
        }
        assert_eq!(
            MatrixGame::by_id("climbing")
                .unwrap()
                .optimal_joint_actions(),
            vec![(0, 0)]
        );
        assert_eq!(
            MatrixGame::by_id("penalty")
                .unwrap()
                .optimal_joint_actions(),
            vec![(0, 2), (2, 0)]
        );
    }
}
