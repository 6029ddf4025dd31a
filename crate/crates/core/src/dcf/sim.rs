use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{airtime_durations, AirtimeDurations, DcfParams};
use crate::error::{Error, Result};

/// Traffic model for the simulated stations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ArrivalMode {
    /// Every station always has a frame queued.
    Saturated,
    /// Bernoulli arrival per virtual slot with the given probability.
    Poisson { per_slot_probability: f64 },
}

/// Outcome counters and elapsed time of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimStats {
    pub slots: u64,
    pub idle: u64,
    pub successes: u64,
    pub collisions: u64,
    pub phy_errors: u64,
    /// Seconds.
    pub elapsed: f64,
    /// Seconds of successfully delivered payload.
    pub payload_time: f64,
}

impl SimStats {
    /// Empirical normalized throughput.
    pub fn throughput(&self) -> f64 {
        if self.elapsed > 0.0 {
            self.payload_time / self.elapsed
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
struct Station {
    stage: u32,
    counter: u32,
    queue: u64,
}

/// Discrete-time DCF model over virtual slots.
///
/// A virtual slot is either an idle backoff slot or one busy period. Stations
/// whose counter is zero transmit; every other backlogged station counts down
/// one step per virtual slot, so a busy period costs the waiting stations one
/// step, matching the Markov chain behind the analytical model. Success resets
/// the stage, and a collision or PHY error raises it up to the last stage.
#[derive(Debug, Clone)]
pub struct DcfSimulator {
    params: DcfParams,
    durations: AirtimeDurations,
    per: f64,
    mode: ArrivalMode,
    stations: Vec<Station>,
    rng: ChaCha8Rng,
    stats: SimStats,
}

impl DcfSimulator {
    pub fn new(
        params: DcfParams,
        n_contenders: u32,
        per: f64,
        mcs_rate: f64,
        mode: ArrivalMode,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        if n_contenders == 0 {
            return Err(Error::InvalidInput("at least one contender is required".into()));
        }
        if !(0.0..=1.0).contains(&per) {
            return Err(Error::InvalidInput(format!("per {per} outside [0, 1]")));
        }
        if let ArrivalMode::Poisson { per_slot_probability: q } = mode {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::InvalidInput(format!("arrival probability {q} outside [0, 1]")));
            }
        }
        let durations = airtime_durations(&params, mcs_rate)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w0 = params.window(0);
        let stations = (0..n_contenders)
            .map(|_| Station {
                stage: 0,
                counter: rng.gen_range(0..w0),
                queue: match mode {
                    ArrivalMode::Saturated => 1,
                    ArrivalMode::Poisson { .. } => 0,
                },
            })
            .collect();
        Ok(Self {
            params,
            durations,
            per,
            mode,
            stations,
            rng,
            stats: SimStats::default(),
        })
    }

    pub fn stats(&self) -> SimStats {
        self.stats
    }

    fn backlogged(&self, s: &Station) -> bool {
        matches!(self.mode, ArrivalMode::Saturated) || s.queue > 0
    }

    fn redraw(&mut self, idx: usize) {
        let w = self.params.window(self.stations[idx].stage);
        self.stations[idx].counter = self.rng.gen_range(0..w);
    }

    /// Advance by one virtual slot.
    pub fn step(&mut self) {
        if let ArrivalMode::Poisson { per_slot_probability: q } = self.mode {
            for i in 0..self.stations.len() {
                if self.rng.gen_bool(q) {
                    let s = &mut self.stations[i];
                    s.queue += 1;
                    if s.queue == 1 {
                        s.stage = 0;
                        self.redraw(i);
                    }
                }
            }
        }

        let transmitters: Vec<usize> = (0..self.stations.len())
            .filter(|&i| self.backlogged(&self.stations[i]) && self.stations[i].counter == 0)
            .collect();
        for i in 0..self.stations.len() {
            if self.backlogged(&self.stations[i]) && self.stations[i].counter > 0 {
                self.stations[i].counter -= 1;
            }
        }

        self.stats.slots += 1;
        match transmitters.len() {
            0 => {
                self.stats.idle += 1;
                self.stats.elapsed += self.params.slot_time;
            }
            1 => {
                let i = transmitters[0];
                let failed = self.per > 0.0 && self.rng.gen_bool(self.per);
                if failed {
                    self.stats.phy_errors += 1;
                    self.stats.elapsed += self.durations.t_phy_error;
                    if self.params.phy_error_backoff {
                        self.fail(i);
                    } else {
                        self.redraw(i);
                    }
                } else {
                    self.stats.successes += 1;
                    self.stats.elapsed += self.durations.t_success;
                    self.stats.payload_time += self.durations.payload_airtime;
                    self.succeed(i);
                }
            }
            _ => {
                self.stats.collisions += 1;
                self.stats.elapsed += self.durations.t_collision;
                for i in transmitters {
                    self.fail(i);
                }
            }
        }
    }

    fn succeed(&mut self, i: usize) {
        let s = &mut self.stations[i];
        s.stage = 0;
        if matches!(self.mode, ArrivalMode::Poisson { .. }) {
            s.queue -= 1;
        }
        self.redraw(i);
    }

    fn fail(&mut self, i: usize) {
        let s = &mut self.stations[i];
        s.stage = (s.stage + 1).min(self.params.max_backoff_stage);
        self.redraw(i);
    }

    pub fn run(&mut self, n_slots: u64) -> SimStats {
        for _ in 0..n_slots {
            self.step();
        }
        self.stats
    }
}

/// Run a saturated simulation and return its statistics.
pub fn simulate_dcf_slots(
    params: &DcfParams,
    n_contenders: u32,
    per: f64,
    mcs_rate: f64,
    n_slots: u64,
    seed: u64,
) -> Result<SimStats> {
    let mut sim = DcfSimulator::new(
        params.clone(),
        n_contenders,
        per,
        mcs_rate,
        ArrivalMode::Saturated,
        seed,
    )?;
    Ok(sim.run(n_slots))
}
