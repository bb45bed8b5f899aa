//! Rectangular-room image-source simulator producing paired echo-path
//! self-responses and room average power responses.
//!
//! Walls are indexed `[x=0, x=Lx, y=0, y=Ly, z=0, z=Lz]`. Each image
//! source carries the product of the reflectances of the walls it was
//! mirrored in, a `1/d` spreading loss and a fractional delay realized with
//! a Hann-windowed sinc kernel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::num::Real;
use crate::spectra::{self, is_power_of_two, log_power_spectrum, power_to_db, ImpulseResponse, LogPowerSpectrum};

pub type Position = [f64; 3];

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
pub const DEFAULT_NFFT: usize = 2048;

/// Fractional-delay kernel length.
pub const KERNEL_TAPS: usize = 16;
const KERNEL_HALF: f64 = (KERNEL_TAPS / 2) as f64;

/// Minimum listener distance from walls and from the speaker, meters.
pub const LISTENER_CLEARANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub dims: [f64; 3],
    pub reflectances: [f64; 6],
    pub max_order: u32,
    pub sample_rate: u32,
    pub speed_of_sound: f64,
}

impl RoomSpec {
    pub fn new(dims: [f64; 3], reflectances: [f64; 6], max_order: u32, sample_rate: u32) -> Result<Self> {
        let room = Self { dims, reflectances, max_order, sample_rate, speed_of_sound: DEFAULT_SPEED_OF_SOUND };
        room.validate()?;
        Ok(room)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(invalid(format!("room dims {:?} must be positive", self.dims)));
        }
        if self.reflectances.iter().any(|&b| !(0.0..1.0).contains(&b)) {
            return Err(invalid(format!("reflectances {:?} must lie in [0, 1)", self.reflectances)));
        }
        if self.sample_rate == 0 {
            return Err(invalid("sample rate must be positive"));
        }
        if !(self.speed_of_sound > 0.0) {
            return Err(invalid("speed of sound must be positive"));
        }
        Ok(())
    }

    /// True when `p` lies strictly inside the room.
    pub fn contains(&self, p: &Position) -> bool {
        p.iter().zip(&self.dims).all(|(&c, &l)| c > 0.0 && c < l)
    }
}

/// Image sources of one speaker position: `(position, reflection gain)`.
#[derive(Debug, Clone)]
pub struct ImageCloud {
    images: Vec<(Position, f64)>,
    sample_rate: u32,
    speed_of_sound: f64,
}

impl ImageCloud {
    pub fn new(room: &RoomSpec, src: &Position) -> Result<Self> {
        room.validate()?;
        if !room.contains(src) {
            return Err(invalid(format!("source {src:?} is not inside the room")));
        }
        let order = room.max_order as i64;
        let beta = &room.reflectances;
        let mut images = Vec::new();
        for nx in -order..=order {
            for ny in -order..=order {
                for nz in -order..=order {
                    for parity in 0..8u8 {
                        let n = [nx, ny, nz];
                        let p = [(parity & 1) as i64, ((parity >> 1) & 1) as i64, ((parity >> 2) & 1) as i64];
                        let mut reflections = 0;
                        let mut gain = 1.0;
                        let mut pos = [0.0; 3];
                        for a in 0..3 {
                            // |n - p| hits of the wall at 0, |n| hits of the wall at L
                            let near = (n[a] - p[a]).unsigned_abs();
                            let far = n[a].unsigned_abs();
                            reflections += near + far;
                            gain *= beta[2 * a].powi(near as i32) * beta[2 * a + 1].powi(far as i32);
                            pos[a] = (1 - 2 * p[a]) as f64 * src[a] + 2.0 * n[a] as f64 * room.dims[a];
                        }
                        if reflections <= room.max_order as u64 && gain > 0.0 {
                            images.push((pos, gain));
                        }
                    }
                }
            }
        }
        Ok(Self { images, sample_rate: room.sample_rate, speed_of_sound: room.speed_of_sound })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Impulse response at `mic`, optionally cut to `max_len` samples.
    pub fn render(&self, mic: &Position, max_len: Option<usize>) -> Result<Vec<f64>> {
        let fs = f64::from(self.sample_rate);
        let arrivals: Vec<(f64, f64)> = self
            .images
            .iter()
            .map(|(pos, gain)| {
                let d = distance(pos, mic);
                (d * fs / self.speed_of_sound, gain / d)
            })
            .collect();
        if arrivals.iter().any(|(_, amp)| !amp.is_finite()) {
            return Err(invalid("microphone coincides with a source image"));
        }
        let natural = arrivals
            .iter()
            .map(|(delay, _)| delay.floor() as usize + KERNEL_TAPS / 2 + 1)
            .max()
            .unwrap_or(1);
        let len = max_len.map_or(natural, |m| m.min(natural)).max(1);
        let mut out = vec![0.0; len];
        for (delay, amp) in arrivals {
            let (first, kernel) = fractional_delay_kernel(delay);
            for (i, k) in kernel.iter().enumerate() {
                let idx = first + i as i64;
                if idx >= 0 && (idx as usize) < len {
                    out[idx as usize] += amp * k;
                }
            }
        }
        Ok(out)
    }
}

fn distance(a: &Position, b: &Position) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Hann-windowed sinc taps for a delay of `delay` samples, normalized to
/// unit DC gain. Returns the index of the first tap.
pub fn fractional_delay_kernel(delay: f64) -> (i64, [f64; KERNEL_TAPS]) {
    let base = delay.floor() as i64;
    let first = base - (KERNEL_TAPS as i64 / 2 - 1);
    let mut taps = [0.0; KERNEL_TAPS];
    for (i, t) in taps.iter_mut().enumerate() {
        let x = (first + i as i64) as f64 - delay;
        let window = 0.5 * (1.0 + (std::f64::consts::PI * x / KERNEL_HALF).cos());
        *t = sinc(x) * window;
    }
    let sum: f64 = taps.iter().sum();
    for t in taps.iter_mut() {
        *t /= sum;
    }
    (first, taps)
}

/// Impulse response from `src` to `mic`, long enough to hold the latest
/// image arrival and its interpolation kernel.
pub fn simulate_rir(room: &RoomSpec, src: &Position, mic: &Position) -> Result<ImpulseResponse<f64>> {
    if !room.contains(mic) {
        return Err(invalid(format!("microphone {mic:?} is not inside the room")));
    }
    if distance(src, mic) == 0.0 {
        return Err(invalid("source and microphone coincide"));
    }
    let cloud = ImageCloud::new(room, src)?;
    ImpulseResponse::new(cloud.render(mic, None)?, room.sample_rate)
}

/// Spatially averaged power response `10 log10(mean_m |H_m|^2 + floor)`.
pub fn average_power_response(
    room: &RoomSpec,
    speaker: &Position,
    listeners: &[Position],
    nfft: usize,
) -> Result<LogPowerSpectrum<f64>> {
    let cloud = ImageCloud::new(room, speaker)?;
    average_power_from_cloud(&cloud, speaker, listeners, nfft)
}

fn average_power_from_cloud(
    cloud: &ImageCloud,
    speaker: &Position,
    listeners: &[Position],
    nfft: usize,
) -> Result<LogPowerSpectrum<f64>> {
    if listeners.is_empty() {
        return Err(invalid("at least one listener position is required"));
    }
    if !is_power_of_two(nfft) {
        return Err(invalid(format!("nfft {nfft} is not a power of two")));
    }
    let mut power = vec![0.0; nfft / 2 + 1];
    for listener in listeners {
        if distance(speaker, listener) == 0.0 {
            return Err(invalid("listener coincides with the speaker"));
        }
        let ir = cloud.render(listener, Some(nfft))?;
        let spectrum = spectra::real_dft(&ir, nfft)?;
        for (p, z) in power.iter_mut().zip(&spectrum) {
            *p += z.norm_sqr();
        }
    }
    let m = listeners.len() as f64;
    let bins = power.into_iter().map(|p| power_to_db(p / m)).collect();
    LogPowerSpectrum::new(bins, cloud.sample_rate, nfft)
}

/// Ranges sampled by [`generate_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub dims_range: [f64; 2],
    pub reflectance_range: [f64; 2],
    pub max_order_range: [u32; 2],
    pub sample_rate: u32,
    pub nfft: usize,
    pub listeners: usize,
    pub mic_offset: f64,
    pub speed_of_sound: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            dims_range: [2.5, 8.0],
            reflectance_range: [0.5, 0.95],
            max_order_range: [6, 6],
            sample_rate: DEFAULT_SAMPLE_RATE,
            nfft: DEFAULT_NFFT,
            listeners: 24,
            mic_offset: 0.05,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let [dmin, dmax] = self.dims_range;
        if !(dmin.is_finite() && dmax.is_finite() && dmin >= 1.5 && dmin <= dmax) {
            return Err(invalid(format!(
                "dims_range [{dmin}, {dmax}] must satisfy 1.5 <= min <= max (listeners keep {LISTENER_CLEARANCE} m from walls)"
            )));
        }
        let [bmin, bmax] = self.reflectance_range;
        if !(bmin >= 0.0 && bmin <= bmax && bmax < 1.0) {
            return Err(invalid(format!(
                "reflectance_range [{bmin}, {bmax}] must satisfy 0 <= min <= max < 1"
            )));
        }
        let [omin, omax] = self.max_order_range;
        if omin > omax {
            return Err(invalid(format!("max_order_range [{omin}, {omax}] must satisfy min <= max")));
        }
        if self.sample_rate == 0 {
            return Err(invalid("sample_rate must be positive"));
        }
        if !is_power_of_two(self.nfft) || self.nfft < 2 {
            return Err(invalid(format!("nfft {} must be a power of two", self.nfft)));
        }
        if self.listeners == 0 {
            return Err(invalid("listeners must be at least 1"));
        }
        if !(self.mic_offset > 0.0 && self.mic_offset < 0.25) {
            return Err(invalid(format!("mic_offset {} must lie in (0, 0.25) m", self.mic_offset)));
        }
        if !(self.speed_of_sound > 0.0) {
            return Err(invalid("speed_of_sound must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Center,
    Wall,
    Corner,
}

/// Provenance of a generated record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub room_id: usize,
    pub seed: u64,
    pub placement: Placement,
    pub speaker: Position,
    pub mic: Position,
    pub room: RoomSpec,
    pub listeners: usize,
}

/// Echo-path self-response paired with the room average power response.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord<T> {
    pub echo_ir: ImpulseResponse<T>,
    pub echo_spectrum: LogPowerSpectrum<T>,
    pub room_avg_spectrum: LogPowerSpectrum<T>,
    pub meta: Option<RecordMeta>,
}

impl<T: Real> DatasetRecord<T> {
    pub fn new(
        echo_ir: ImpulseResponse<T>,
        echo_spectrum: LogPowerSpectrum<T>,
        room_avg_spectrum: LogPowerSpectrum<T>,
        meta: Option<RecordMeta>,
    ) -> Result<Self> {
        if !echo_spectrum.same_grid(&room_avg_spectrum) {
            return Err(invalid("echo and room spectra use different grids"));
        }
        if echo_ir.sample_rate() != echo_spectrum.sample_rate() {
            return Err(invalid("echo impulse response and spectrum sample rates differ"));
        }
        Ok(Self { echo_ir, echo_spectrum, room_avg_spectrum, meta })
    }

    /// Builds a record whose echo spectrum is computed from `echo_ir`.
    pub fn from_echo_ir(echo_ir: ImpulseResponse<T>, room_avg_spectrum: LogPowerSpectrum<T>, meta: Option<RecordMeta>) -> Result<Self> {
        let echo_spectrum = log_power_spectrum(&echo_ir, room_avg_spectrum.nfft())?;
        Self::new(echo_ir, echo_spectrum, room_avg_spectrum, meta)
    }

    pub fn nfft(&self) -> usize {
        self.echo_spectrum.nfft()
    }

    pub fn sample_rate(&self) -> u32 {
        self.echo_spectrum.sample_rate()
    }

    pub fn cast<U: Real>(&self) -> DatasetRecord<U> {
        DatasetRecord {
            echo_ir: self.echo_ir.cast(),
            echo_spectrum: self.echo_spectrum.cast(),
            room_avg_spectrum: self.room_avg_spectrum.cast(),
            meta: self.meta.clone(),
        }
    }
}

/// PRNG stream for room `index` of a dataset generated with `seed`.
pub fn room_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Generates one record per room. Each room draws from its own PRNG stream
/// so the output does not depend on scheduling.
pub fn generate_dataset(config: &GeneratorConfig, rooms: usize, seed: u64) -> Result<Vec<DatasetRecord<f64>>> {
    config.validate()?;
    if rooms == 0 {
        return Err(invalid("rooms must be at least 1"));
    }
    (0..rooms)
        .into_par_iter()
        .map(|index| generate_room(config, seed, index))
        .collect()
}

pub fn generate_room(config: &GeneratorConfig, seed: u64, index: usize) -> Result<DatasetRecord<f64>> {
    let mut rng = room_rng(seed, index);
    let dims = [
        uniform(&mut rng, config.dims_range),
        uniform(&mut rng, config.dims_range),
        uniform(&mut rng, config.dims_range),
    ];
    let mut reflectances = [0.0; 6];
    for b in reflectances.iter_mut() {
        *b = uniform(&mut rng, config.reflectance_range);
    }
    let [omin, omax] = config.max_order_range;
    let max_order = rng.gen_range(omin..=omax);
    let room = RoomSpec {
        dims,
        reflectances,
        max_order,
        sample_rate: config.sample_rate,
        speed_of_sound: config.speed_of_sound,
    };

    let (placement, speaker) = place_speaker(&mut rng, &dims);
    let mic = [speaker[0], speaker[1], speaker[2] + config.mic_offset];
    let listeners = place_listeners(&mut rng, &dims, &speaker, config.listeners);

    let cloud = ImageCloud::new(&room, &speaker)?;
    let echo = ImpulseResponse::new(cloud.render(&mic, Some(config.nfft))?, config.sample_rate)?;
    let room_avg = average_power_from_cloud(&cloud, &speaker, &listeners, config.nfft)?;
    let meta = RecordMeta { room_id: index, seed, placement, speaker, mic, room, listeners: listeners.len() };
    DatasetRecord::from_echo_ir(echo, room_avg, Some(meta))
}

fn place_speaker(rng: &mut ChaCha8Rng, dims: &[f64; 3]) -> (Placement, Position) {
    let near_wall = |rng: &mut ChaCha8Rng, len: f64| {
        let gap = rng.gen_range(0.15..0.4);
        if rng.gen_bool(0.5) {
            gap
        } else {
            len - gap
        }
    };
    let placement = match rng.gen_range(0..3) {
        0 => Placement::Center,
        1 => Placement::Wall,
        _ => Placement::Corner,
    };
    let (x, y) = match placement {
        Placement::Center => (rng.gen_range(0.35..0.65) * dims[0], rng.gen_range(0.35..0.65) * dims[1]),
        Placement::Wall => {
            if rng.gen_bool(0.5) {
                (near_wall(rng, dims[0]), rng.gen_range(0.3..0.7) * dims[1])
            } else {
                (rng.gen_range(0.3..0.7) * dims[0], near_wall(rng, dims[1]))
            }
        }
        Placement::Corner => (near_wall(rng, dims[0]), near_wall(rng, dims[1])),
    };
    let z = rng.gen_range(0.4..(dims[2] - 0.3).min(1.2));
    (placement, [x, y, z])
}

/// Jittered grid of listener positions at least [`LISTENER_CLEARANCE`] from
/// every wall, re-drawn when a draw lands too close to the speaker.
fn place_listeners(rng: &mut ChaCha8Rng, dims: &[f64; 3], speaker: &Position, count: usize) -> Vec<Position> {
    let (w, d) = (dims[0] - 2.0 * LISTENER_CLEARANCE, dims[1] - 2.0 * LISTENER_CLEARANCE);
    let cols = ((count as f64 * w / d).sqrt().round() as usize).clamp(1, count);
    let rows = count.div_ceil(cols);
    let z_lo = 1.0f64.min(dims[2] - LISTENER_CLEARANCE);
    let z_hi = 1.8f64.min(dims[2] - LISTENER_CLEARANCE).max(z_lo);
    (0..count)
        .map(|i| {
            let (cx, cy) = (i % cols, i / cols);
            let mut p = [0.0; 3];
            for _ in 0..32 {
                p = [
                    LISTENER_CLEARANCE + (cx as f64 + rng.gen::<f64>()) * w / cols as f64,
                    LISTENER_CLEARANCE + (cy as f64 + rng.gen::<f64>()) * d / rows as f64,
                    uniform(rng, [z_lo, z_hi]),
                ];
                if distance(&p, speaker) >= LISTENER_CLEARANCE {
                    break;
                }
            }
            p
        })
        .collect()
}
