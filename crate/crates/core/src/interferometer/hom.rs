//! Unbalanced Mach-Zehnder HOM interferometer.
//!
//! Photons pick the short or long arm at the first splitter. The long arm
//! delays by `delay_ps`, so a long-arm photon of pulse `k` meets short-arm
//! photons of pulse `k + round(delay/period)` at the output coupler. When
//! exactly one photon arrives from each input in a slot, the pair bunches
//! with probability M = ν²·|⟨φ₁|φ₂⟩|² (co-polarized) or 0 (cross-polarized);
//! otherwise photons leave through independent random ports.

use arrayvec::ArrayVec;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::InterferometerError;
use crate::emitter::{self, CascadeSource, DetectorModel, LaserClock, Line, Photon};
use crate::rng::{Domain, StreamFactory};
use crate::timetag::TimeTag;

/// Slots handled per parallel work item in [`simulate_hom`].
const CHUNK_SLOTS: u64 = 1 << 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    Co,
    Cross,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomBench {
    pub delay_ps: u64,
    /// Probability of entering the long arm.
    pub split_first: f64,
    /// Classical visibility ν of the output coupler.
    pub nu: f64,
    pub polarization: Polarization,
    /// Transmissions of the (short, long) arms.
    pub arm_transmissions: (f64, f64),
}

impl Default for HomBench {
    fn default() -> Self {
        HomBench {
            delay_ps: 12_500,
            split_first: 0.5,
            nu: 1.0,
            polarization: Polarization::Co,
            arm_transmissions: (1.0, 1.0),
        }
    }
}

impl HomBench {
    pub fn co() -> Self {
        HomBench::default()
    }

    pub fn cross() -> Self {
        HomBench { polarization: Polarization::Cross, ..HomBench::default() }
    }

    /// Bench with the first splitter set so both arms transmit equal intensity.
    pub fn balanced(mut self, t_short: f64, t_long: f64) -> Self {
        self.arm_transmissions = (t_short, t_long);
        // split * t_long == (1 - split) * t_short
        self.split_first = t_short / (t_short + t_long);
        self
    }

    pub fn validate(&self) -> Result<(), InterferometerError> {
        let bad = |m: String| Err(InterferometerError::Parameter(m));
        if self.delay_ps == 0 {
            return bad("delay must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.nu) {
            return bad(format!("classical visibility {} outside [0, 1]", self.nu));
        }
        if !(0.0..=1.0).contains(&self.split_first) {
            return bad(format!("split {} outside [0, 1]", self.split_first));
        }
        let (a, b) = self.arm_transmissions;
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
            return bad("arm transmissions must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Photons leaving the two output ports. Offsets include the arm delay.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HomOutput {
    pub port1: Vec<Photon>,
    pub port2: Vec<Photon>,
}

/// Detected tags of the two output ports.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HomPorts {
    pub out1: Vec<TimeTag>,
    pub out2: Vec<TimeTag>,
}

type Routed = (Photon, bool);

struct Router {
    bench: HomBench,
    period: u64,
    shift: u64,
    arms: StreamFactory,
    coupler: StreamFactory,
}

impl Router {
    fn new(bench: &HomBench, clock: &LaserClock, seed: u64) -> Result<Self, InterferometerError> {
        bench.validate()?;
        let shift = (bench.delay_ps as f64 / clock.period_ps as f64).round() as u64;
        Ok(Router {
            bench: *bench,
            period: clock.period_ps,
            shift,
            arms: StreamFactory::new(seed, Domain::HomArms),
            coupler: StreamFactory::new(seed, Domain::HomCoupler),
        })
    }

    /// Arm choice and arm loss for the photons of one pulse.
    fn arms(&self, photons: &[Photon]) -> (ArrayVec<Photon, 4>, ArrayVec<Photon, 4>) {
        let mut short = ArrayVec::new();
        let mut long = ArrayVec::new();
        let Some(first) = photons.first() else { return (short, long) };
        let mut rng = self.arms.stream(first.pulse);
        let (t_short, t_long) = self.bench.arm_transmissions;
        for p in photons.iter().take(4) {
            let is_long = rng.random::<f64>() < self.bench.split_first;
            let survives = rng.random::<f64>() < if is_long { t_long } else { t_short };
            if survives {
                if is_long {
                    long.push(*p);
                } else {
                    short.push(*p);
                }
            }
        }
        (short, long)
    }

    /// Output coupler for one arrival slot. `arrivals` lists long-arm photons first.
    fn couple(&self, slot: u64, arrivals: &[Routed], port1: &mut impl Extend<Photon>, port2: &mut impl Extend<Photon>) {
        if arrivals.is_empty() {
            return;
        }
        let mut rng = self.coupler.stream(slot);
        let delay = self.bench.delay_ps as f64;
        let exit = |(p, long): &Routed| Photon { offset: p.offset + if *long { delay } else { 0.0 }, ..*p };
        if let [a, b] = arrivals {
            if a.1 != b.1 {
                let m = self.bunching_probability(a, b);
                if rng.random::<f64>() < m {
                    let both = [exit(a), exit(b)];
                    if rng.random::<bool>() {
                        port1.extend(both);
                    } else {
                        port2.extend(both);
                    }
                    return;
                }
            }
        }
        for r in arrivals {
            if rng.random::<bool>() {
                port1.extend([exit(r)]);
            } else {
                port2.extend([exit(r)]);
            }
        }
    }

    fn bunching_probability(&self, a: &Routed, b: &Routed) -> f64 {
        match self.bench.polarization {
            Polarization::Cross => 0.0,
            Polarization::Co => {
                // start times relative to the later pulse's nominal time
                let rel = |(p, long): &Routed| {
                    let arm = if *long { self.bench.delay_ps as f64 } else { 0.0 };
                    arm - ((a.0.pulse.max(b.0.pulse) - p.pulse) * self.period) as f64
                };
                self.bench.nu * self.bench.nu * a.0.packet.overlap_sq(rel(a), &b.0.packet, rel(b))
            }
        }
    }

    /// Routes pulses `[p_lo, p_hi)` and couples slots `[s_lo, s_hi)`.
    ///
    /// `pulse_photons(p)` yields the photons of pulse `p`.
    fn route_slots<F, S>(&self, s_lo: u64, s_hi: u64, n_pulses: u64, pulse_photons: F, mut sink: S)
    where
        F: Fn(u64) -> ArrayVec<Photon, 4>,
        S: FnMut(u64, &[Routed]),
    {
        let p_lo = s_lo.saturating_sub(self.shift);
        let p_hi = s_hi.min(n_pulses);
        if p_lo >= p_hi {
            return;
        }
        let routed: Vec<_> = (p_lo..p_hi).map(|p| self.arms(&pulse_photons(p))).collect();
        let mut arrivals: ArrayVec<Routed, 8> = ArrayVec::new();
        for s in s_lo..s_hi {
            arrivals.clear();
            if s >= self.shift {
                let p = s - self.shift;
                if p >= p_lo && p < p_hi {
                    arrivals.extend(routed[(p - p_lo) as usize].1.iter().map(|p| (*p, true)));
                }
            }
            if s >= p_lo && s < p_hi {
                arrivals.extend(routed[(s - p_lo) as usize].0.iter().map(|p| (*p, false)));
            }
            sink(s, &arrivals);
        }
    }
}

/// Routes photons through the HOM bench.
///
/// `photons` must be ordered by `(pulse, seq)` and carry their emission
/// metadata, as produced by [`CascadeSource::photons`].
pub fn hom_route(
    photons: &[Photon],
    bench: &HomBench,
    clock: &LaserClock,
    seed: u64,
) -> Result<HomOutput, InterferometerError> {
    if let Some(i) = photons.windows(2).position(|w| (w[1].pulse, w[1].seq) <= (w[0].pulse, w[0].seq)) {
        return Err(InterferometerError::Contract(format!(
            "photons not ordered by (pulse, seq) at index {}",
            i + 1
        )));
    }
    if photons.iter().any(|p| !(p.packet.tau > 0.0) || !p.offset.is_finite()) {
        return Err(InterferometerError::Contract("photon without valid wave-packet metadata".into()));
    }
    let router = Router::new(bench, clock, seed)?;
    let mut out = HomOutput::default();
    let Some(last) = photons.last() else { return Ok(out) };
    let first_pulse = photons[0].pulse;
    let n_pulses = last.pulse + 1;
    let lookup = |p: u64| -> ArrayVec<Photon, 4> {
        let start = photons.partition_point(|x| x.pulse < p);
        photons[start..].iter().take_while(|x| x.pulse == p).take(4).copied().collect()
    };
    let mut port1 = Vec::new();
    let mut port2 = Vec::new();
    router.route_slots(first_pulse, n_pulses + router.shift, n_pulses, lookup, |s, arr| {
        router.couple(s, arr, &mut port1, &mut port2)
    });
    out.port1 = port1;
    out.port2 = port2;
    Ok(out)
}

/// Streams `n_pulses` of one cascade line through the HOM bench and detects
/// both outputs. Equivalent to [`hom_route`] followed by
/// [`emitter::detect_photons`] on each port, without holding all photons in
/// memory.
#[allow(clippy::too_many_arguments)]
pub fn simulate_hom(
    source: &CascadeSource,
    line: Line,
    bench: &HomBench,
    detectors: [DetectorModel; 2],
    channels: [u16; 2],
    n_pulses: u64,
    seed: u64,
) -> Result<HomPorts, InterferometerError> {
    detectors[0].validate()?;
    detectors[1].validate()?;
    let clock = source.clock;
    let router = Router::new(bench, &clock, seed)?;
    let det_streams = [
        emitter::photon_detection_streams(seed, channels[0]),
        emitter::photon_detection_streams(seed, channels[1]),
    ];
    let n_slots = n_pulses + router.shift;
    let n_chunks = n_slots.div_ceil(CHUNK_SLOTS);
    let parts: Vec<HomPorts> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK_SLOTS;
            let hi = (lo + CHUNK_SLOTS).min(n_slots);
            let mut p1 = Vec::new();
            let mut p2 = Vec::new();
            let photons = |p: u64| source.pulse(p).line(line).iter().copied().collect();
            router.route_slots(lo, hi, n_pulses, photons, |s, arr| router.couple(s, arr, &mut p1, &mut p2));
            let detect = |ps: &[Photon], i: usize| -> Vec<TimeTag> {
                ps.iter()
                    .filter_map(|p| emitter::detect_one(p, &clock, &detectors[i], channels[i], &det_streams[i]))
                    .collect()
            };
            HomPorts { out1: detect(&p1, 0), out2: detect(&p2, 1) }
        })
        .collect();
    let mut out1 = Vec::new();
    let mut out2 = Vec::new();
    for p in parts {
        out1.extend(p.out1);
        out2.extend(p.out2);
    }
    Ok(HomPorts {
        out1: emitter::finish_stream(out1, detectors[0].dead_time),
        out2: emitter::finish_stream(out2, detectors[1].dead_time),
    })
}

/// Expected normalized peak areas out1 × out2 for one photon per pulse,
/// delay equal to one period, by enumerating arm and port choices of every
/// photon pair (2 arms × 2 arms × 2 ports × 2 ports).
///
/// `p_long` is the long-arm probability, `m_bar` the mean bunching
/// probability of photons meeting at the coupler. Areas are divided by the
/// far-peak value; returns `(k, area)` for `-k_max..=k_max`.
pub fn hom_peak_oracle(p_long: f64, m_bar: f64, k_max: i64) -> Vec<(i64, f64)> {
    let k_max = k_max.max(0);
    let mut w = vec![0.0; (2 * k_max + 1) as usize];
    // pulse separation m; pairs further apart than k_max + 1 cannot land inside
    for m in 1..=k_max + 1 {
        for (arm_a, arm_b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let pa = if arm_a == 1 { p_long } else { 1.0 - p_long };
            let pb = if arm_b == 1 { p_long } else { 1.0 - p_long };
            let d = m + arm_b - arm_a;
            let meet = d == 0;
            for (port_a, port_b) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
                let p_ports = if meet {
                    // bunch with probability M into one random port
                    if port_a == port_b { 0.5 * m_bar + 0.25 * (1.0 - m_bar) } else { 0.25 * (1.0 - m_bar) }
                } else {
                    0.25
                };
                // delay = t(out2) − t(out1)
                let k = match (port_a, port_b) {
                    (1, 2) => d,
                    (2, 1) => -d,
                    _ => continue,
                };
                if k.abs() <= k_max {
                    w[(k + k_max) as usize] += pa * pb * p_ports;
                }
            }
        }
    }
    let far = 2.0 * p_long * (1.0 - p_long) * 0.25 + 0.25 * (p_long * p_long + (1.0 - p_long) * (1.0 - p_long));
    (-k_max..=k_max).zip(w).map(|(k, v)| (k, v / far)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emitter::EmitterModel;
    use crate::interferometer::WavePacket;

    fn photon(pulse: u64, offset: f64) -> Photon {
        Photon { pulse, seq: 0, offset, packet: WavePacket::new(0.0, 100.0), flags: 0 }
    }

    #[test]
    fn photon_number_conserved() {
        let src = CascadeSource::new(EmitterModel { p_multi: 0.05, ..EmitterModel::ideal(161.0, 619.0) }, LaserClock::default(), 3).unwrap();
        let photons = src.photons(Line::X, 0..20_000);
        let out = hom_route(&photons, &HomBench::co(), &src.clock, 5).unwrap();
        assert_eq!(out.port1.len() + out.port2.len(), photons.len());
    }

    #[test]
    fn identical_packets_always_bunch() {
        // two photons per slot from opposite arms, perfectly overlapping
        let photons: Vec<Photon> = (0..2000).map(|k| photon(k, 50.0)).collect();
        let bench = HomBench::co();
        let router = Router::new(&bench, &LaserClock::default(), 1).unwrap();
        let mut pairs = 0;
        for s in 1..2000u64 {
            let a = (photons[s as usize - 1], true);
            let b = (photons[s as usize], false);
            let (mut p1, mut p2) = (Vec::new(), Vec::new());
            router.couple(s, &[a, b], &mut p1, &mut p2);
            assert!(p1.len() == 2 || p2.len() == 2);
            pairs += 1;
        }
        assert_eq!(pairs, 1999);
    }

    #[test]
    fn unordered_input_is_contract_error() {
        let photons = vec![photon(3, 0.0), photon(1, 0.0)];
        let err = hom_route(&photons, &HomBench::co(), &LaserClock::default(), 1).unwrap_err();
        assert!(matches!(err, InterferometerError::Contract(_)));
    }

    #[test]
    fn missing_packet_metadata_is_contract_error() {
        let mut p = photon(0, 0.0);
        p.packet.tau = 0.0;
        assert!(matches!(
            hom_route(&[p], &HomBench::co(), &LaserClock::default(), 1),
            Err(InterferometerError::Contract(_))
        ));
    }

    #[test]
    fn streaming_matches_slice_route() {
        let src = CascadeSource::new(EmitterModel { p_multi: 0.02, ..EmitterModel::ideal(161.0, 619.0) }, LaserClock::default(), 21).unwrap();
        let n = 3 * CHUNK_SLOTS + 17;
        let dets = [DetectorModel::default(), DetectorModel::default()];
        let streamed = simulate_hom(&src, Line::X, &HomBench::co(), dets, [1, 2], n, 8).unwrap();
        let photons = src.photons(Line::X, 0..n);
        let routed = hom_route(&photons, &HomBench::co(), &src.clock, 8).unwrap();
        let out1 = emitter::detect_photons(&routed.port1, &src.clock, &dets[0], 1, 8).unwrap();
        let out2 = emitter::detect_photons(&routed.port2, &src.clock, &dets[1], 2, 8).unwrap();
        assert_eq!(streamed.out1, out1);
        assert_eq!(streamed.out2, out2);
    }

    #[test]
    fn balanced_split_equalizes_arms() {
        let b = HomBench::co().balanced(0.8, 0.5);
        let (ts, tl) = b.arm_transmissions;
        assert!((b.split_first * tl - (1.0 - b.split_first) * ts).abs() < 1e-12);
        assert!(HomBench { nu: 1.2, ..HomBench::co() }.validate().is_err());
    }

    #[test]
    fn oracle_pattern() {
        let cross: Vec<f64> = hom_peak_oracle(0.5, 0.0, 3).into_iter().map(|x| x.1).collect();
        let want = [1.0, 1.0, 0.75, 0.5, 0.75, 1.0, 1.0];
        for (a, b) in cross.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{cross:?}");
        }
        let co = hom_peak_oracle(0.5, 1.0, 3);
        assert_eq!(co[3], (0, 0.0));
        assert!((co[2].1 - 0.75).abs() < 1e-12);
    }
}
