//! Agent days: an itinerary of dwells and straight-line trips, rendered as
//! noisy pings plus an exact trip log.
//!
//! Every day starts and ends at home, and all travel happens between 07:00 and
//! 23:00 local time, so trips never straddle midnight.

use chrono::NaiveDate;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};

use crate::geodata::{haversine_km, GeoPoint, GeographyHierarchy, Level};
use crate::ingest::Fix;
use crate::mobility::Purpose;
use crate::time::{self, LocalClock, SECONDS_PER_DAY};

use super::population::{uniform_point_in, Agent};
use super::scenario::{Phase, ScenarioConfig};
use super::substream;

/// Share of non-work destinations drawn 0.6–1.2 km from home.
pub const LOCAL_TRIP_SHARE: f64 = 0.06;
/// Shortest regular non-work destination distance.
pub const MIN_TRIP_KM: f64 = 0.7;
/// Latest local time at which the last trip of a day may end.
pub const LAST_ARRIVAL_S: i64 = 23 * 3600;
const SPEED_KMH: std::ops::Range<f64> = 30.0..70.0;
const DESTINATION_TRIES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TruthTrip {
    pub device_id: String,
    pub date: NaiveDate,
    /// UTC epoch seconds.
    pub depart: i64,
    pub arrive: i64,
    pub origin: GeoPoint,
    pub dest: GeoPoint,
    pub origin_zone: String,
    pub dest_zone: String,
    pub distance_km: f64,
    pub purpose: Purpose,
    pub crosses_county: bool,
}

/// One itinerary piece; times are local seconds of the day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Dwell { at: GeoPoint, from: i64, to: i64 },
    Travel { from_pt: GeoPoint, to_pt: GeoPoint, depart: i64, arrive: i64 },
}

/// Pings and trips of one agent over one or more days, ascending in time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgentTrace {
    pub fixes: Vec<Fix>,
    pub trips: Vec<TruthTrip>,
}

fn travel_s(a: GeoPoint, b: GeoPoint, rng: &mut ChaCha8Rng) -> i64 {
    let v = rng.gen_range(SPEED_KMH);
    ((haversine_km(a, b) / v * 3600.0).round() as i64).max(1)
}

fn county(geo: &GeographyHierarchy, p: GeoPoint) -> Option<&str> {
    geo.assign_zone(p).and_then(|z| geo.ancestor(z, Level::County).ok())
}

/// A non-work destination: a short local hop, or an exponential distance on
/// a uniform bearing, constrained to leave the home county with probability
/// `out_of_county_prob` and to stay in it otherwise.
pub fn sample_destination(
    agent: &Agent,
    phase: &Phase,
    scenario: &ScenarioConfig,
    geo: &GeographyHierarchy,
    rng: &mut ChaCha8Rng,
) -> GeoPoint {
    let bearing_point = |rng: &mut ChaCha8Rng, km: f64| {
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        agent.home.offset_m(km * 1000.0 * theta.cos(), km * 1000.0 * theta.sin())
    };
    if rng.gen_bool(LOCAL_TRIP_SHARE) {
        for _ in 0..DESTINATION_TRIES {
            let km = rng.gen_range(0.6..1.2);
            let p = bearing_point(rng, km);
            if geo.covers(p) {
                return p;
            }
        }
    }
    let leave = rng.gen_bool(phase.out_of_county_prob);
    let mean = scenario.mean_trip_km * phase.distance_scale;
    let exp = (mean > 0.0).then(|| Exp::new(1.0 / mean).expect("positive rate"));
    for _ in 0..DESTINATION_TRIES {
        let km = MIN_TRIP_KM + exp.map_or(0.0, |e| e.sample(rng));
        let p = bearing_point(rng, km);
        if let Some(c) = county(geo, p) {
            if (c != agent.home_county) == leave {
                return p;
            }
        }
    }
    // Fallback: a uniform point in a qualifying leaf zone.
    let pool: Vec<_> = geo
        .leaves()
        .filter(|z| {
            let c = geo.ancestor(&z.zone_id, Level::County).unwrap_or_default();
            (c != agent.home_county) == leave
        })
        .collect();
    let pool = if pool.is_empty() {
        geo.leaves_under(&agent.home_county).unwrap_or_default()
    } else {
        pool
    };
    let z = pool[rng.gen_range(0..pool.len())];
    uniform_point_in(z, rng)
}

/// Draws the itinerary for `date`, covering the whole local day.
pub fn plan_day(
    agent: &Agent,
    date: NaiveDate,
    scenario: &ScenarioConfig,
    geo: &GeographyHierarchy,
    rng: &mut ChaCha8Rng,
) -> Vec<Segment> {
    let phase = scenario.phase_on(date);
    let (work_mult, nonwork_mult) = if time::is_weekday(date) {
        (1.0, 1.0)
    } else {
        (scenario.weekend.work, scenario.weekend.nonwork)
    };
    let mut day = Itinerary::new(agent.home);

    if !rng.gen_bool(phase.stay_home_prob) {
        let commute = agent
            .work
            .as_ref()
            .filter(|_| rng.gen_bool((phase.work_trip_rate * work_mult).min(1.0)));
        let lambda = phase.nonwork_trip_rate * nonwork_mult / 2.0;
        let tours = if lambda > 0.0 {
            Poisson::new(lambda).expect("positive mean").sample(rng) as usize
        } else {
            0
        };
        let mut t = if commute.is_some() {
            7 * 3600 + rng.gen_range(0..7200)
        } else {
            8 * 3600 + 1800 + rng.gen_range(0..9000)
        };
        if let Some(w) = commute {
            let dwell = rng.gen_range(7 * 3600..=9 * 3600);
            let (out, back) = (travel_s(agent.home, w.point, rng), travel_s(w.point, agent.home, rng));
            if t + out + dwell + back <= LAST_ARRIVAL_S {
                day.visit(t, w.point, out, dwell, back);
                t = day.home_since + rng.gen_range(1200..=5400);
            }
        }
        for _ in 0..tours {
            let dest = sample_destination(agent, phase, scenario, geo, rng);
            let dwell = rng.gen_range(600..=3000);
            let (out, back) = (travel_s(agent.home, dest, rng), travel_s(dest, agent.home, rng));
            if t + out + dwell + back > LAST_ARRIVAL_S {
                break;
            }
            day.visit(t, dest, out, dwell, back);
            t = day.home_since + rng.gen_range(900..=5400);
        }
    }
    day.finish()
}

/// Home-based tours appended in time order.
struct Itinerary {
    home: GeoPoint,
    home_since: i64,
    plan: Vec<Segment>,
}

impl Itinerary {
    fn new(home: GeoPoint) -> Self {
        Self { home, home_since: 0, plan: Vec::new() }
    }

    /// Leave home at `depart`, spend `dwell` seconds at `at`, come back.
    fn visit(&mut self, depart: i64, at: GeoPoint, out: i64, dwell: i64, back: i64) {
        let home = self.home;
        let arrive = depart + out;
        let leave = arrive + dwell;
        self.plan.extend([
            Segment::Dwell { at: home, from: self.home_since, to: depart },
            Segment::Travel { from_pt: home, to_pt: at, depart, arrive },
            Segment::Dwell { at, from: arrive, to: leave },
            Segment::Travel { from_pt: at, to_pt: home, depart: leave, arrive: leave + back },
        ]);
        self.home_since = leave + back;
    }

    fn finish(mut self) -> Vec<Segment> {
        self.plan.push(Segment::Dwell { at: self.home, from: self.home_since, to: SECONDS_PER_DAY });
        self.plan
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Renders an itinerary: dwell pings on arrival, departure and every
/// `dwell_ping_interval_s` of the day grid; travel pings every `ping_interval_s`
/// along the straight path, ending at least half an interval before arrival. Faulty pings are mixed in at the scenario's rates.
pub fn render_day(
    agent: &Agent,
    date: NaiveDate,
    plan: &[Segment],
    scenario: &ScenarioConfig,
    geo: &GeographyHierarchy,
    clock: &LocalClock,
    rng: &mut ChaCha8Rng,
) -> AgentTrace {
    let mut truth_points: Vec<(i64, GeoPoint)> = Vec::new();
    let mut trips = Vec::new();
    let grid = scenario.dwell_ping_interval_s;
    for seg in plan {
        match *seg {
            Segment::Dwell { at, from, to } => {
                truth_points.push((from, at));
                let mut g = (from / grid + 1) * grid;
                while g < to {
                    truth_points.push((g, at));
                    g += grid;
                }
                if to < SECONDS_PER_DAY {
                    truth_points.push((to, at));
                }
            }
            Segment::Travel { from_pt, to_pt, depart, arrive } => {
                // Transit pings keep half an interval clear of the arrival ping.
                let mut t = depart + scenario.ping_interval_s;
                while t < arrive - scenario.ping_interval_s / 2 {
                    let f = (t - depart) as f64 / (arrive - depart) as f64;
                    truth_points.push((t, from_pt.lerp(&to_pt, f)));
                    t += scenario.ping_interval_s;
                }
                let zone = |p| geo.assign_zone(p).expect("itinerary points lie in the geography").to_owned();
                let (oz, dz) = (zone(from_pt), zone(to_pt));
                let work = agent.work.as_ref().map(|w| w.zone_id.as_str());
                let purpose = if work.is_some_and(|w| w == oz || w == dz) {
                    Purpose::Work
                } else {
                    Purpose::NonWork
                };
                let crosses_county = geo.ancestor(&oz, Level::County).ok() != geo.ancestor(&dz, Level::County).ok();
                trips.push(TruthTrip {
                    device_id: agent.device_id.clone(),
                    date,
                    depart: clock.at(date, depart),
                    arrive: clock.at(date, arrive),
                    origin: from_pt,
                    dest: to_pt,
                    origin_zone: oz,
                    dest_zone: dz,
                    distance_km: haversine_km(from_pt, to_pt),
                    purpose,
                    crosses_county,
                });
            }
        }
    }
    truth_points.sort_by_key(|(t, _)| *t);
    truth_points.dedup_by_key(|(t, _)| *t);

    let noise = (scenario.ping_noise_m > 0.0).then(|| Normal::new(0.0, scenario.ping_noise_m).expect("finite sd"));
    let jitter = |rng: &mut ChaCha8Rng, p: GeoPoint, sd_scale: f64| match noise {
        Some(n) => p.offset_m(n.sample(rng) * sd_scale, n.sample(rng) * sd_scale),
        None => p,
    };
    let far = far_point(geo);
    let out = &scenario.outliers;
    let mut fixes = Vec::with_capacity(truth_points.len() + 4);
    for (i, &(t, p)) in truth_points.iter().enumerate() {
        let q = jitter(rng, p, 1.0);
        let fix = Fix {
            timestamp: clock.at(date, t),
            point: GeoPoint { lat: round6(q.lat), lon: round6(q.lon) },
            accuracy_m: Some((rng.gen_range(5.0..30.0f64) * 10.0).round() / 10.0),
        };
        fixes.push(fix);
        let next = truth_points.get(i + 1).map_or(SECONDS_PER_DAY, |n| n.0);
        if rng.gen_bool(out.duplicate) {
            fixes.push(fix);
        }
        if rng.gen_bool(out.low_accuracy) && t + 7 < next {
            let q = jitter(rng, p, 10.0);
            fixes.push(Fix {
                timestamp: fix.timestamp + 7,
                point: GeoPoint { lat: round6(q.lat), lon: round6(q.lon) },
                accuracy_m: Some(rng.gen_range(150.0..500.0f64).round()),
            });
        }
        if let Some(far) = far {
            if rng.gen_bool(out.out_of_coverage) && t + 11 < next {
                fixes.push(Fix {
                    timestamp: fix.timestamp + 11,
                    point: far,
                    accuracy_m: fix.accuracy_m,
                });
            }
        }
    }
    AgentTrace { fixes, trips }
}

/// A valid point one degree beyond the geography's extent, if one exists.
fn far_point(geo: &GeographyHierarchy) -> Option<GeoPoint> {
    let b = geo.nation().polygon.bbox();
    [b.max_lat + 1.0, b.min_lat - 1.0]
        .into_iter()
        .map(|lat| GeoPoint { lat, lon: b.min_lon })
        .find(|p| p.is_valid() && !geo.covers(*p))
}

/// Simulates `agent` on `date` from its own (seed, agent, day) substream.
pub fn simulate_day(agent: &Agent, date: NaiveDate, scenario: &ScenarioConfig, geo: &GeographyHierarchy) -> AgentTrace {
    let mut rng = substream(scenario.seed, agent.index as u64 + 1, time::day_number(date));
    let clock = LocalClock::new(scenario.utc_offset_s);
    let plan = plan_day(agent, date, scenario, geo, &mut rng);
    render_day(agent, date, &plan, scenario, geo, &clock, &mut rng)
}

/// Simulates `agent` over the scenario's whole date range.
pub fn simulate_agent(agent: &Agent, scenario: &ScenarioConfig, geo: &GeographyHierarchy) -> AgentTrace {
    let mut all = AgentTrace::default();
    for date in scenario.dates() {
        let day = simulate_day(agent, date, scenario, geo);
        all.fixes.extend(day.fixes);
        all.trips.extend(day.trips);
    }
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::path_km;
    use crate::synth::layout::{grid_geography, GridSpec};
    use crate::synth::population::generate_population;
    use crate::synth::scenario::tests::SMALL;

    fn setup() -> (GeographyHierarchy, ScenarioConfig, Vec<Agent>) {
        let geo = grid_geography(&GridSpec::default()).unwrap();
        let s = ScenarioConfig::from_toml(SMALL).unwrap();
        let agents = generate_population(&geo, &s).unwrap();
        (geo, s, agents)
    }

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 2, day).unwrap()
    }

    #[test]
    fn plans_tile_the_day() {
        let (geo, s, agents) = setup();
        for a in agents.iter().take(20) {
            for day in [3, 8, 12] {
                let mut rng = substream(1, a.index as u64, day);
                let plan = plan_day(a, d(day as u32), &s, &geo, &mut rng);
                let mut t = 0;
                for seg in &plan {
                    let (from, to) = match *seg {
                        Segment::Dwell { from, to, .. } => (from, to),
                        Segment::Travel { depart, arrive, .. } => {
                            assert!(depart >= 7 * 3600 && arrive <= LAST_ARRIVAL_S);
                            (depart, arrive)
                        }
                    };
                    assert_eq!(from, t);
                    assert!(to > from);
                    t = to;
                }
                assert_eq!(t, SECONDS_PER_DAY);
                assert!(matches!(plan.last(), Some(Segment::Dwell { at, .. }) if *at == a.home));
            }
        }
    }

    #[test]
    fn deterministic_per_agent_day() {
        let (geo, s, agents) = setup();
        let a = simulate_day(&agents[3], d(5), &s, &geo);
        assert_eq!(a, simulate_day(&agents[3], d(5), &s, &geo));
        assert_ne!(a, simulate_day(&agents[3], d(6), &s, &geo));
        assert_ne!(a, simulate_day(&agents[4], d(5), &s, &geo));
    }

    #[test]
    fn pings_are_sorted_and_cover_every_hour() {
        let (geo, s, agents) = setup();
        let clock = LocalClock::new(s.utc_offset_s);
        for a in agents.iter().take(30) {
            let tr = simulate_day(a, d(4), &s, &geo);
            assert!(tr.fixes.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
            for h in 0..24 {
                let (lo, hi) = (clock.at(d(4), h * 3600), clock.at(d(4), (h + 1) * 3600));
                assert!(tr.fixes.iter().any(|f| (lo..hi).contains(&f.timestamp)));
            }
            for t in &tr.trips {
                assert_eq!(t.purpose == Purpose::Work, a.work.as_ref().is_some_and(|w| w.zone_id == t.origin_zone || w.zone_id == t.dest_zone));
            }
        }
    }

    #[test]
    fn stay_home_prob_one_means_no_trips() {
        let (geo, mut s, agents) = setup();
        for p in &mut s.phases {
            p.stay_home_prob = 1.0;
        }
        for a in &agents {
            assert!(simulate_day(a, d(4), &s, &geo).trips.is_empty());
        }
    }

    #[test]
    fn scripted_ten_km_trip() {
        let (geo, mut s, agents) = setup();
        s.outliers = Default::default();
        s.outliers.low_accuracy = 0.0;
        s.outliers.out_of_coverage = 0.0;
        s.outliers.duplicate = 0.0;
        let a = &agents[0];
        let dest = a.home.offset_m(0.0, 10_000.0);
        let dest = if geo.covers(dest) { dest } else { a.home.offset_m(0.0, -10_000.0) };
        let plan = [
            Segment::Dwell { at: a.home, from: 0, to: 36_000 },
            Segment::Travel { from_pt: a.home, to_pt: dest, depart: 36_000, arrive: 36_600 },
            Segment::Dwell { at: dest, from: 36_600, to: SECONDS_PER_DAY },
        ];
        let clock = LocalClock::default();
        let mut rng = substream(0, 0, 0);
        s.ping_noise_m = 0.0;
        let exact = render_day(a, d(4), &plan, &s, &geo, &clock, &mut rng);
        let trip = &exact.trips[0];
        assert!((trip.distance_km - 10.0).abs() < 0.01, "{}", trip.distance_km);
        let on_path = |tr: &AgentTrace| {
            tr.fixes
                .iter()
                .filter(|f| (clock.at(d(4), 36_000)..=clock.at(d(4), 36_600)).contains(&f.timestamp))
                .map(|f| f.point)
                .collect::<Vec<_>>()
        };
        let pts = on_path(&exact);
        assert_eq!(pts.len(), 11);
        assert!((path_km(pts.iter().copied()) - trip.distance_km).abs() < 0.01);

        s.ping_noise_m = 20.0;
        let noisy = on_path(&render_day(a, d(4), &plan, &s, &geo, &clock, &mut rng));
        // Each of the 11 pings moves at most ~6 sd; path error is bounded by twice that per ping.
        let bound = 11.0 * 2.0 * 6.0 * 20.0 * std::f64::consts::SQRT_2 / 1000.0;
        assert!((path_km(noisy.iter().copied()) - 10.0).abs() < bound);
    }

    #[test]
    fn destinations_respect_the_county_constraint() {
        let (geo, s, agents) = setup();
        let mut phase = s.phases[0].clone();
        let mut rng = substream(3, 3, 3);
        for leave in [0.0, 1.0] {
            phase.out_of_county_prob = leave;
            for a in agents.iter().take(40) {
                let p = sample_destination(a, &phase, &s, &geo, &mut rng);
                let c = county(&geo, p).unwrap();
                assert_eq!(c != a.home_county, leave == 1.0);
            }
        }
    }
}
