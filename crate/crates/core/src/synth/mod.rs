//! Deterministic synthetic mobility with exact ground truth.
//!
//! All randomness comes from ChaCha8 streams keyed by `(seed, stream, tag)`:
//! stream 0 builds the population and stream `i + 1` drives agent `i`, with the
//! day number as tag. Any agent-day can therefore be regenerated on its own, and
//! output never depends on scheduling.

pub mod layout;
pub mod population;
pub mod scenario;
pub mod simulate;
pub mod truth;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use population::{generate_population, Agent, Workplace};
pub use scenario::{OutlierRates, Phase, ScenarioConfig, WeekendFactors};
pub use simulate::{simulate_agent, simulate_day, AgentTrace, Segment, TruthTrip};
pub use truth::{write_truth_trips_csv, TruthAccumulator};

use crate::error::Result;
use crate::exec;
use crate::geodata::GeographyHierarchy;
use crate::metrics::DailyMetrics;

/// Agents simulated per batch handed to the sink.
pub const AGENT_CHUNK: usize = 64;

pub fn substream(seed: u64, stream: u64, tag: i64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    key[16..24].copy_from_slice(&tag.to_le_bytes());
    key[24..].copy_from_slice(b"sdisynth");
    ChaCha8Rng::from_seed(key)
}

/// Simulates every agent over the scenario range. `sink` receives batches of
/// [`AGENT_CHUNK`] traces in agent order; the return value is the ground truth.
pub fn run_scenario(
    scenario: &ScenarioConfig,
    geo: &GeographyHierarchy,
    agents: &[Agent],
    mut sink: impl FnMut(&[Agent], Vec<AgentTrace>) -> Result<()>,
) -> Result<Vec<DailyMetrics>> {
    let mut truth = TruthAccumulator::new(geo, agents, &scenario.dates())?;
    for chunk in agents.chunks(AGENT_CHUNK) {
        let traces = exec::map(chunk, |a| simulate_agent(a, scenario, geo));
        for (a, tr) in chunk.iter().zip(&traces) {
            truth.add(a, &tr.trips)?;
        }
        sink(chunk, traces)?;
    }
    Ok(truth.finish())
}
