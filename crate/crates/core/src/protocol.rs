//! Leader election on a multiple access channel with ternary feedback.
//!
//! Time unit 0 is the deterministic initialisation: every station transmits
//! its id. With two or more stations this collides and the randomised
//! selection starts; each later time unit is one coin-flip round. The cost
//! `H_n` counts coin-flip rounds only, so `time_units = coin_flip_rounds + 1`.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::SplitParams;

pub type StationId = u32;

/// Default cap on coin-flip rounds. A silence streak this long has
/// probability `q^(2 * 10^5)`; hitting it means a bug.
pub const DEFAULT_MAX_ROUNDS: u64 = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelFeedback {
    Silence,
    Success(StationId),
    Collision,
}

impl ChannelFeedback {
    /// Feedback produced by a set of simultaneous senders.
    pub fn from_senders(senders: &[StationId]) -> Self {
        match senders {
            [] => ChannelFeedback::Silence,
            [only] => ChannelFeedback::Success(*only),
            _ => ChannelFeedback::Collision,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationStatus {
    Active,
    NonActive,
    Eliminated,
    Leader,
}

/// One time unit: who transmitted, who listened, who is already out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round {
    pub active: Vec<StationId>,
    pub non_active: Vec<StationId>,
    pub eliminated: Vec<StationId>,
    pub feedback: ChannelFeedback,
}

impl Round {
    pub fn status_of(&self, id: StationId) -> StationStatus {
        if self.active.contains(&id) {
            match self.feedback {
                ChannelFeedback::Success(leader) if leader == id => StationStatus::Leader,
                _ => StationStatus::Active,
            }
        } else if self.non_active.contains(&id) {
            StationStatus::NonActive
        } else {
            StationStatus::Eliminated
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElectionStatus {
    Completed,
    /// `max_rounds` coin-flip rounds elapsed without a leader.
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElectionTrace {
    pub n: u32,
    /// Every time unit, initialisation first.
    pub rounds: Vec<Round>,
    pub coin_flip_rounds: u64,
    pub time_units: u64,
    /// `None` only for `n = 0` or a truncated run.
    pub leader: Option<StationId>,
    pub status: ElectionStatus,
}

/// Source of the per-round Bernoulli flips.
pub trait CoinSource {
    /// One flip per candidate, in candidate order. `round` counts coin-flip rounds from 1.
    fn flips(
        &mut self,
        round: usize,
        candidates: &[StationId],
        n_stations: u32,
        params: &SplitParams,
    ) -> Result<Vec<bool>>;
}

/// Independent Bernoulli(`p`) flips.
pub struct RandomCoins<'a, R: Rng + ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> CoinSource for RandomCoins<'_, R> {
    fn flips(
        &mut self,
        _round: usize,
        candidates: &[StationId],
        _n_stations: u32,
        params: &SplitParams,
    ) -> Result<Vec<bool>> {
        Ok(candidates
            .iter()
            .map(|_| self.0.random_bool(params.p()))
            .collect())
    }
}

/// Replays a fixed flip script, one entry per coin-flip round.
///
/// A round's entry lists either one flip per current candidate, or one flip
/// per station (entries of eliminated stations are ignored).
#[derive(Debug, Clone, Default)]
pub struct ScriptedCoins {
    rounds: Vec<Vec<bool>>,
}

impl ScriptedCoins {
    pub fn new(rounds: Vec<Vec<bool>>) -> Self {
        Self { rounds }
    }

    /// Parses `"1110,000,1000"`: comma-separated rounds of `0`/`1` digits.
    pub fn parse(script: &str) -> Result<Self> {
        let mut rounds = Vec::new();
        for chunk in script.split(',') {
            let chunk = chunk.trim();
            if chunk.is_empty() {
                return Err(Error::InvalidArgument("empty round in flip script"));
            }
            let flips = chunk
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(Error::InvalidArgument("flip script may only contain 0, 1 and commas")),
                })
                .collect::<Result<Vec<_>>>()?;
            rounds.push(flips);
        }
        Ok(Self { rounds })
    }
}

impl CoinSource for ScriptedCoins {
    fn flips(
        &mut self,
        round: usize,
        candidates: &[StationId],
        n_stations: u32,
        _params: &SplitParams,
    ) -> Result<Vec<bool>> {
        let script = self
            .rounds
            .get(round - 1)
            .ok_or(Error::ScriptExhausted { round })?;
        if script.len() == candidates.len() {
            Ok(script.clone())
        } else if script.len() == n_stations as usize {
            Ok(candidates.iter().map(|&id| script[id as usize]).collect())
        } else {
            Err(Error::ScriptLength {
                round,
                got: script.len(),
                candidates: candidates.len(),
                stations: n_stations as usize,
            })
        }
    }
}

/// Result of a single coin-flip round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundOutcome {
    pub feedback: ChannelFeedback,
    /// Flipped 1 and transmitted.
    pub active: Vec<StationId>,
    /// Flipped 0 and listened.
    pub non_active: Vec<StationId>,
    /// Candidates for the next round (empty once a leader is found).
    pub candidates: Vec<StationId>,
    /// Stations eliminated by this round.
    pub newly_eliminated: Vec<StationId>,
}

/// One round of the randomised selection process over `candidates`.
pub fn run_round<C: CoinSource + ?Sized>(
    candidates: &[StationId],
    round: usize,
    n_stations: u32,
    params: &SplitParams,
    coins: &mut C,
) -> Result<RoundOutcome> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("a round needs at least one candidate"));
    }
    let flips = coins.flips(round, candidates, n_stations, params)?;
    let (mut active, mut non_active) = (Vec::new(), Vec::new());
    for (&id, &flip) in candidates.iter().zip(&flips) {
        if flip {
            active.push(id);
        } else {
            non_active.push(id);
        }
    }
    let feedback = ChannelFeedback::from_senders(&active);
    let (next, newly_eliminated) = match feedback {
        ChannelFeedback::Silence => (candidates.to_vec(), Vec::new()),
        ChannelFeedback::Success(_) => (Vec::new(), Vec::new()),
        ChannelFeedback::Collision => (active.clone(), non_active.clone()),
    };
    Ok(RoundOutcome {
        feedback,
        active,
        non_active,
        candidates: next,
        newly_eliminated,
    })
}

/// Full election among stations `0..n`, recording every time unit.
pub fn run_election<C: CoinSource + ?Sized>(
    n: u32,
    params: &SplitParams,
    coins: &mut C,
    max_rounds: u64,
) -> Result<ElectionTrace> {
    if max_rounds == 0 {
        return Err(Error::InvalidArgument("max_rounds must be at least 1"));
    }
    let stations: Vec<StationId> = (0..n).collect();
    let init = Round {
        active: stations.clone(),
        non_active: Vec::new(),
        eliminated: Vec::new(),
        feedback: ChannelFeedback::from_senders(&stations),
    };
    let mut rounds = alloc::vec![init];
    let mut trace = ElectionTrace {
        n,
        rounds: Vec::new(),
        coin_flip_rounds: 0,
        time_units: 1,
        leader: None,
        status: ElectionStatus::Completed,
    };
    if n <= 1 {
        trace.leader = stations.first().copied();
        trace.rounds = rounds;
        return Ok(trace);
    }

    let mut candidates = stations;
    let mut eliminated: Vec<StationId> = Vec::new();
    loop {
        if trace.coin_flip_rounds >= max_rounds {
            trace.status = ElectionStatus::Truncated;
            break;
        }
        trace.coin_flip_rounds += 1;
        let outcome = run_round(
            &candidates,
            trace.coin_flip_rounds as usize,
            n,
            params,
            coins,
        )?;
        rounds.push(Round {
            active: outcome.active,
            non_active: outcome.non_active,
            eliminated: eliminated.clone(),
            feedback: outcome.feedback,
        });
        eliminated.extend(outcome.newly_eliminated);
        eliminated.sort_unstable();
        if let ChannelFeedback::Success(id) = outcome.feedback {
            trace.leader = Some(id);
            break;
        }
        candidates = outcome.candidates;
    }
    trace.time_units = trace.coin_flip_rounds + 1;
    trace.rounds = rounds;
    Ok(trace)
}

/// Number of coin-flip rounds of one election, without keeping the trace.
/// `None` when `max_rounds` is exceeded.
pub fn election_cost<R: Rng + ?Sized>(
    n: u32,
    params: &SplitParams,
    rng: &mut R,
    max_rounds: u64,
) -> Option<u64> {
    if n <= 1 {
        return Some(0);
    }
    let mut candidates: u32 = n;
    let mut rounds = 0;
    while rounds < max_rounds {
        rounds += 1;
        let senders = (0..candidates).filter(|_| rng.random_bool(params.p())).count() as u32;
        match senders {
            0 => {}
            1 => return Some(rounds),
            s => candidates = s,
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;
    use alloc::vec;

    fn half() -> SplitParams {
        SplitParams::new(0.5).unwrap()
    }

    #[test]
    fn feedback_follows_sender_count() {
        assert_eq!(ChannelFeedback::from_senders(&[]), ChannelFeedback::Silence);
        assert_eq!(ChannelFeedback::from_senders(&[4]), ChannelFeedback::Success(4));
        assert_eq!(ChannelFeedback::from_senders(&[1, 2]), ChannelFeedback::Collision);
    }

    #[test]
    fn single_candidate_forced_one_succeeds() {
        let mut coins = ScriptedCoins::new(vec![vec![true]]);
        let out = run_round(&[0], 1, 1, &half(), &mut coins).unwrap();
        assert_eq!(out.feedback, ChannelFeedback::Success(0));
        assert!(out.candidates.is_empty());
    }

    #[test]
    fn two_candidates_both_flip_one_collide() {
        let mut coins = ScriptedCoins::new(vec![vec![true, true]]);
        let out = run_round(&[0, 1], 1, 2, &half(), &mut coins).unwrap();
        assert_eq!(out.feedback, ChannelFeedback::Collision);
        assert_eq!(out.candidates, vec![0, 1]);
        assert!(out.newly_eliminated.is_empty());
    }

    #[test]
    fn two_station_exhaustive_round() {
        let cases = [
            ([false, false], ChannelFeedback::Silence, vec![0, 1]),
            ([true, false], ChannelFeedback::Success(0), vec![]),
            ([false, true], ChannelFeedback::Success(1), vec![]),
            ([true, true], ChannelFeedback::Collision, vec![0, 1]),
        ];
        for (flips, feedback, next) in cases {
            let mut coins = ScriptedCoins::new(vec![flips.to_vec()]);
            let out = run_round(&[0, 1], 1, 2, &half(), &mut coins).unwrap();
            assert_eq!(out.feedback, feedback);
            assert_eq!(out.candidates, next);
            assert!(out.newly_eliminated.is_empty());
        }
    }

    #[test]
    fn collision_eliminates_only_zero_flippers() {
        let mut coins = ScriptedCoins::new(vec![vec![true, false, true, false]]);
        let out = run_round(&[0, 1, 2, 3], 1, 4, &half(), &mut coins).unwrap();
        assert_eq!(out.candidates, vec![0, 2]);
        assert_eq!(out.newly_eliminated, vec![1, 3]);
    }

    #[test]
    fn four_station_script_replay() {
        // A, B, C, D = 0, 1, 2, 3
        let mut coins = ScriptedCoins::parse("1110,000,100").unwrap();
        let t = run_election(4, &half(), &mut coins, 100).unwrap();
        assert_eq!(t.leader, Some(0));
        assert_eq!(t.coin_flip_rounds, 3);
        assert_eq!(t.time_units, 4);
        let feedback: Vec<_> = t.rounds.iter().map(|r| r.feedback).collect();
        assert_eq!(
            feedback,
            vec![
                ChannelFeedback::Collision,
                ChannelFeedback::Collision,
                ChannelFeedback::Silence,
                ChannelFeedback::Success(0)
            ]
        );
        assert_eq!(t.rounds[1].non_active, vec![3]);
        assert_eq!(t.rounds[2].eliminated, vec![3]);
        assert_eq!(t.rounds[3].active, vec![0]);
        assert_eq!(t.rounds[3].non_active, vec![1, 2]);
        assert_eq!(t.rounds[3].status_of(0), StationStatus::Leader);
        assert_eq!(t.rounds[3].status_of(3), StationStatus::Eliminated);
    }

    #[test]
    fn station_length_script_ignores_eliminated_entries() {
        let a = run_election(4, &half(), &mut ScriptedCoins::parse("1110,000,1000").unwrap(), 100);
        let b = run_election(4, &half(), &mut ScriptedCoins::parse("1110,000,100").unwrap(), 100);
        assert_eq!(a.unwrap(), b.unwrap());
    }

    #[test]
    fn script_errors() {
        let mut short = ScriptedCoins::parse("1110").unwrap();
        assert!(matches!(
            run_election(4, &half(), &mut short, 100),
            Err(Error::ScriptExhausted { round: 2 })
        ));
        let mut bad = ScriptedCoins::parse("11").unwrap();
        assert!(matches!(
            run_election(4, &half(), &mut bad, 100),
            Err(Error::ScriptLength { .. })
        ));
        assert!(ScriptedCoins::parse("10x").is_err());
        assert!(ScriptedCoins::parse("10,,1").is_err());
    }

    #[test]
    fn boundary_sizes() {
        let mut rng = trial_rng(1, 0);
        let one = run_election(1, &half(), &mut RandomCoins(&mut rng), 10).unwrap();
        assert_eq!(one.coin_flip_rounds, 0);
        assert_eq!(one.time_units, 1);
        assert_eq!(one.leader, Some(0));
        assert_eq!(one.rounds[0].feedback, ChannelFeedback::Success(0));
        let zero = run_election(0, &half(), &mut RandomCoins(&mut rng), 10).unwrap();
        assert_eq!(zero.coin_flip_rounds, 0);
        assert_eq!(zero.leader, None);
        assert_eq!(election_cost(1, &half(), &mut rng, 10), Some(0));
    }

    #[test]
    fn truncation_is_reported() {
        let mut coins = ScriptedCoins::parse("00,00,00").unwrap();
        let t = run_election(2, &half(), &mut coins, 3).unwrap();
        assert_eq!(t.status, ElectionStatus::Truncated);
        assert_eq!(t.leader, None);
        assert_eq!(t.coin_flip_rounds, 3);
    }

    #[test]
    fn random_traces_keep_partition_and_shrink_candidates() {
        let s = SplitParams::new(0.35).unwrap();
        for trial in 0..300 {
            let mut rng = trial_rng(99, trial);
            let t = run_election(12, &s, &mut RandomCoins(&mut rng), DEFAULT_MAX_ROUNDS).unwrap();
            assert_eq!(t.status, ElectionStatus::Completed);
            assert!(t.leader.is_some());
            assert_eq!(t.time_units, t.coin_flip_rounds + 1);
            let mut last = u32::MAX as usize;
            for r in &t.rounds {
                let mut all: Vec<_> = r
                    .active
                    .iter()
                    .chain(&r.non_active)
                    .chain(&r.eliminated)
                    .copied()
                    .collect();
                all.sort_unstable();
                assert_eq!(all, (0..12).collect::<Vec<_>>());
                let cand = r.active.len() + r.non_active.len();
                assert!(cand <= last);
                last = cand;
            }
        }
    }
}
