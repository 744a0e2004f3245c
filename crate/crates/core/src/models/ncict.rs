//! Synthetic CT organ-dose model. The dose for one scan is a per-slice sum of
//! a machine-and-technique factor (CTDIvol) times organ dose coefficients:
//!
//! ```text
//! dose = Σ_{z=start}^{end} CTDIvol(model, kVp, filter, mAs, pitch)
//!                          × DC(organ, age, gender, kVp, filter, z)
//! CTDIvol = nCTDIw(model, kVp, filter) / pitch × mAs / 100
//! ```
//!
//! Real coefficient libraries are proprietary; [`synth_dose_tables`] builds a
//! smooth, positive, anatomically plausible stand-in, and [`ncict_sample`]
//! draws scan populations whose inputs carry realistic dependence (scan
//! start/end strongly correlated, pitch tied to both and traded against kVp).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use super::copula::GaussianCopula;
use super::ModelError;
use crate::dataset::{ColumnData, ColumnSpec, ColumnKind, Dataset};

/// Ages of the reference phantoms the coefficient tables are resolved at.
pub const PHANTOM_AGES: [u8; 6] = [0, 1, 5, 10, 15, 18];
/// Tube potentials the tables cover, in kVp.
pub const KVP_LEVELS: [u16; 4] = [80, 100, 120, 140];
/// Axial slices: z runs over 1..=165 cm.
pub const BODY_SLICES: u16 = 165;
/// CT machine models 1..=12.
pub const MACHINE_MODELS: u8 = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    F,
    M,
}

/// Beam-shaping filter, fixed by the examination class: head scans use the
/// 16 cm head filter, everything else the 32 cm body filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Filter {
    #[serde(rename = "head-16cm")]
    Head16,
    #[serde(rename = "body-32cm")]
    Body32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Organ {
    Brain,
    RedBoneMarrow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExamClass {
    Head,
    Chest,
    Abdopelvis,
    Multiple,
}

impl ExamClass {
    /// Inclusive support of the scan start position, in cm.
    pub fn start_window(self) -> (i64, i64) {
        match self {
            ExamClass::Head => (1, 12),
            ExamClass::Chest => (35, 50),
            ExamClass::Abdopelvis => (70, 90),
            ExamClass::Multiple => (5, 40),
        }
    }

    /// Inclusive support of the scan end position, in cm.
    pub fn end_window(self) -> (i64, i64) {
        match self {
            ExamClass::Head => (14, 30),
            ExamClass::Chest => (55, 75),
            ExamClass::Abdopelvis => (100, 120),
            ExamClass::Multiple => (60, 140),
        }
    }

    pub fn filter(self) -> Filter {
        match self {
            ExamClass::Head => Filter::Head16,
            _ => Filter::Body32,
        }
    }
}

/// One CT examination: patient and acquisition parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanRecord {
    pub age: u8,
    pub gender: Gender,
    /// First scanned slice, cm in 1..=165.
    pub start: u16,
    /// Last scanned slice, cm in 1..=165; `start <= end`.
    pub end: u16,
    /// Tube current-time product, 4..=505.
    pub mas: u16,
    /// Tube potential, one of {80, 100, 120, 140}.
    pub kvp: u16,
    /// Helical pitch in [0.2, 1.75].
    pub pitch: f64,
    /// Machine model id, 1..=12.
    pub model: u8,
}

impl ScanRecord {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: String| Err(ModelError::InvalidScanRecord(msg));
        if self.age > 18 {
            return fail(format!("age {} > 18", self.age));
        }
        if !(1..=BODY_SLICES).contains(&self.start) || !(1..=BODY_SLICES).contains(&self.end) {
            return fail(format!("slices {}..{} outside 1..=165", self.start, self.end));
        }
        if self.start > self.end {
            return fail(format!("start {} > end {}", self.start, self.end));
        }
        if !(4..=505).contains(&self.mas) {
            return fail(format!("mAs {} outside 4..=505", self.mas));
        }
        if !KVP_LEVELS.contains(&self.kvp) {
            return fail(format!("kVp {} not in {{80,100,120,140}}", self.kvp));
        }
        if !self.pitch.is_finite() || !(0.2..=1.75).contains(&self.pitch) {
            return fail(format!("pitch {} outside [0.2, 1.75]", self.pitch));
        }
        if !(1..=MACHINE_MODELS).contains(&self.model) {
            return fail(format!("model {} outside 1..=12", self.model));
        }
        Ok(())
    }
}

/// Nearest phantom age for a patient age; exact midpoints resolve to the
/// younger phantom (age 3 → phantom 1).
pub fn phantom_age(age: u8) -> u8 {
    let mut best = PHANTOM_AGES[0];
    let mut best_dist = (age as i32 - best as i32).abs();
    for &p in &PHANTOM_AGES[1..] {
        let dist = (age as i32 - p as i32).abs();
        if dist < best_dist {
            best = p;
            best_dist = dist;
        }
    }
    best
}

const N_ORGANS: usize = 2;
const N_AGES: usize = PHANTOM_AGES.len();
const N_GENDERS: usize = 2;
const N_KVP: usize = KVP_LEVELS.len();
const N_FILTERS: usize = 2;
const N_Z: usize = BODY_SLICES as usize;

fn organ_index(o: Organ) -> usize {
    match o {
        Organ::Brain => 0,
        Organ::RedBoneMarrow => 1,
    }
}

fn gender_index(g: Gender) -> usize {
    match g {
        Gender::F => 0,
        Gender::M => 1,
    }
}

fn filter_index(f: Filter) -> usize {
    match f {
        Filter::Head16 => 0,
        Filter::Body32 => 1,
    }
}

fn kvp_index(kvp: u16) -> Option<usize> {
    KVP_LEVELS.iter().position(|&k| k == kvp)
}

fn age_index(age: u8) -> Option<usize> {
    PHANTOM_AGES.iter().position(|&a| a == age)
}

/// Dose coefficient tables: `nCTDIw` per (model, kVp, filter) in mGy per
/// 100 mAs, and dimensionless `DC` per (organ, phantom age, gender, kVp,
/// filter, z). Dense over the whole declared domain.
///
/// Serializes as keyed record lists (see [`DoseTablesFile`]-shaped JSON), so
/// the on-disk form is self-describing; deserialization checks the domain is
/// covered exactly once and that values are in range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DoseTablesFile", into = "DoseTablesFile")]
pub struct DoseTables {
    nctdiw: Vec<f64>,
    dc: Vec<f64>,
}

fn nctdiw_slot(model: u8, kvp_idx: usize, filter: Filter) -> usize {
    ((model as usize - 1) * N_KVP + kvp_idx) * N_FILTERS + filter_index(filter)
}

fn dc_slot(organ: Organ, age_idx: usize, gender: Gender, kvp_idx: usize, filter: Filter, z: u16) -> usize {
    ((((organ_index(organ) * N_AGES + age_idx) * N_GENDERS + gender_index(gender)) * N_KVP
        + kvp_idx)
        * N_FILTERS
        + filter_index(filter))
        * N_Z
        + (z as usize - 1)
}

impl DoseTables {
    /// `nCTDIw(model, kVp, filter)` in mGy per 100 mAs.
    pub fn nctdiw(&self, model: u8, kvp: u16, filter: Filter) -> Result<f64, ModelError> {
        if !(1..=MACHINE_MODELS).contains(&model) {
            return Err(ModelError::MissingTableEntry(format!("nCTDIw model {model}")));
        }
        let ki = kvp_index(kvp)
            .ok_or_else(|| ModelError::MissingTableEntry(format!("nCTDIw kVp {kvp}")))?;
        Ok(self.nctdiw[nctdiw_slot(model, ki, filter)])
    }

    /// `DC(organ, phantom age, gender, kVp, filter, z)`; `age` must be one of
    /// the phantom ages (snap patient ages with [`phantom_age`] first).
    pub fn dc(
        &self,
        organ: Organ,
        age: u8,
        gender: Gender,
        kvp: u16,
        filter: Filter,
        z: u16,
    ) -> Result<f64, ModelError> {
        let ai = age_index(age)
            .ok_or_else(|| ModelError::MissingTableEntry(format!("DC phantom age {age}")))?;
        let ki = kvp_index(kvp)
            .ok_or_else(|| ModelError::MissingTableEntry(format!("DC kVp {kvp}")))?;
        if !(1..=BODY_SLICES).contains(&z) {
            return Err(ModelError::MissingTableEntry(format!("DC slice z={z}")));
        }
        Ok(self.dc[dc_slot(organ, ai, gender, ki, filter, z)])
    }
}

/// Keyed on-disk form of [`DoseTables`].
#[derive(Clone, Serialize, Deserialize)]
pub struct DoseTablesFile {
    pub nctdiw: Vec<NctdiwRecord>,
    pub dc: Vec<DcRecord>,
}

#[derive(Clone, Serialize, Deserialize)]
pub struct NctdiwRecord {
    pub model: u8,
    pub kvp: u16,
    pub filter: Filter,
    pub value: f64,
}

#[derive(Clone, Serialize, Deserialize)]
pub struct DcRecord {
    pub organ: Organ,
    pub age: u8,
    pub gender: Gender,
    pub kvp: u16,
    pub filter: Filter,
    pub z: u16,
    pub value: f64,
}

impl TryFrom<DoseTablesFile> for DoseTables {
    type Error = ModelError;

    fn try_from(file: DoseTablesFile) -> Result<Self, ModelError> {
        let bad = |msg: String| Err(ModelError::BadTablePayload(msg));
        let mut nctdiw = vec![f64::NAN; MACHINE_MODELS as usize * N_KVP * N_FILTERS];
        for r in &file.nctdiw {
            if !(1..=MACHINE_MODELS).contains(&r.model) {
                return bad(format!("nCTDIw model {}", r.model));
            }
            let Some(ki) = kvp_index(r.kvp) else {
                return bad(format!("nCTDIw kVp {}", r.kvp));
            };
            if !(r.value.is_finite() && r.value > 0.0) {
                return bad(format!("nCTDIw value {}", r.value));
            }
            let slot = nctdiw_slot(r.model, ki, r.filter);
            if !nctdiw[slot].is_nan() {
                return bad(format!("duplicate nCTDIw entry for model {}", r.model));
            }
            nctdiw[slot] = r.value;
        }
        if nctdiw.iter().any(|v| v.is_nan()) {
            return bad("nCTDIw table does not cover its domain".into());
        }
        let mut dc = vec![f64::NAN; N_ORGANS * N_AGES * N_GENDERS * N_KVP * N_FILTERS * N_Z];
        for r in &file.dc {
            let Some(ai) = age_index(r.age) else {
                return bad(format!("DC age {} is not a phantom age", r.age));
            };
            let Some(ki) = kvp_index(r.kvp) else {
                return bad(format!("DC kVp {}", r.kvp));
            };
            if !(1..=BODY_SLICES).contains(&r.z) {
                return bad(format!("DC slice z={}", r.z));
            }
            if !(r.value.is_finite() && r.value >= 0.0) {
                return bad(format!("DC value {}", r.value));
            }
            let slot = dc_slot(r.organ, ai, r.gender, ki, r.filter, r.z);
            if !dc[slot].is_nan() {
                return bad(format!("duplicate DC entry at z={}", r.z));
            }
            dc[slot] = r.value;
        }
        if dc.iter().any(|v| v.is_nan()) {
            return bad("DC table does not cover its domain".into());
        }
        Ok(DoseTables { nctdiw, dc })
    }
}

impl From<DoseTables> for DoseTablesFile {
    fn from(tables: DoseTables) -> Self {
        let mut nctdiw = Vec::with_capacity(tables.nctdiw.len());
        for model in 1..=MACHINE_MODELS {
            for (ki, &kvp) in KVP_LEVELS.iter().enumerate() {
                for filter in [Filter::Head16, Filter::Body32] {
                    nctdiw.push(NctdiwRecord {
                        model,
                        kvp,
                        filter,
                        value: tables.nctdiw[nctdiw_slot(model, ki, filter)],
                    });
                }
            }
        }
        let mut dc = Vec::with_capacity(tables.dc.len());
        for organ in [Organ::Brain, Organ::RedBoneMarrow] {
            for (ai, &age) in PHANTOM_AGES.iter().enumerate() {
                for gender in [Gender::F, Gender::M] {
                    for (ki, &kvp) in KVP_LEVELS.iter().enumerate() {
                        for filter in [Filter::Head16, Filter::Body32] {
                            for z in 1..=BODY_SLICES {
                                dc.push(DcRecord {
                                    organ,
                                    age,
                                    gender,
                                    kvp,
                                    filter,
                                    z,
                                    value: tables.dc[dc_slot(organ, ai, gender, ki, filter, z)],
                                });
                            }
                        }
                    }
                }
            }
        }
        DoseTablesFile { nctdiw, dc }
    }
}

/// `CTDIvol = nCTDIw(model, kVp, filter) / pitch × mAs / 100`, in mGy.
pub fn ctdi_vol(
    model: u8,
    kvp: u16,
    filter: Filter,
    mas: u16,
    pitch: f64,
    tables: &DoseTables,
) -> Result<f64, ModelError> {
    if !pitch.is_finite() || pitch <= 0.0 {
        return Err(ModelError::BadPitch(pitch));
    }
    let n = tables.nctdiw(model, kvp, filter)?;
    Ok(n / pitch * (mas as f64 / 100.0))
}

/// Absorbed organ dose of one scan, in mGy: CTDIvol times the sum of the
/// organ's dose coefficients over the scanned slices. CTDIvol does not depend
/// on z, so the sum factorizes as `ctdi_vol × Σ_z DC`.
pub fn organ_dose(
    rec: &ScanRecord,
    organ: Organ,
    filter: Filter,
    tables: &DoseTables,
) -> Result<f64, ModelError> {
    rec.validate()?;
    let cv = ctdi_vol(rec.model, rec.kvp, filter, rec.mas, rec.pitch, tables)?;
    let age = phantom_age(rec.age);
    let mut coeff_sum = 0.0;
    for z in rec.start..=rec.end {
        coeff_sum += tables.dc(organ, age, rec.gender, rec.kvp, filter, z)?;
    }
    Ok(cv * coeff_sum)
}

fn gaussian(z: f64, center: f64, sigma: f64) -> f64 {
    let t = (z - center) / sigma;
    (-0.5 * t * t).exp()
}

fn gaussian_density(z: f64, center: f64, sigma: f64) -> f64 {
    gaussian(z, center, sigma) / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Builds synthetic coefficient tables from smooth parametric curves:
/// brain DC is a head-centered bump decaying with distance, red-bone-marrow
/// DC spreads body-wide with an age-dependent head fraction, and nCTDIw grows
/// with kVp with the head filter reading above the body filter. The seed only
/// jitters per-machine gains and organ amplitudes; the anatomy is fixed.
pub fn synth_dose_tables(seed: u64) -> DoseTables {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model_gain: Vec<f64> = (0..MACHINE_MODELS).map(|_| rng.gen_range(0.85..1.15)).collect();
    let brain_amp_jitter = rng.gen_range(0.95..1.05);
    let rbm_amp_jitter = rng.gen_range(0.95..1.05);

    let mut nctdiw = vec![0.0; MACHINE_MODELS as usize * N_KVP * N_FILTERS];
    for model in 1..=MACHINE_MODELS {
        for (ki, &kvp) in KVP_LEVELS.iter().enumerate() {
            for filter in [Filter::Head16, Filter::Body32] {
                // Smaller phantom, higher reading: head filter above body.
                let base = match filter {
                    Filter::Head16 => 15.0,
                    Filter::Body32 => 7.5,
                };
                let potential = (kvp as f64 / 100.0).powf(2.5);
                nctdiw[nctdiw_slot(model, ki, filter)] =
                    base * potential * model_gain[model as usize - 1];
            }
        }
    }

    let mut dc = vec![0.0; N_ORGANS * N_AGES * N_GENDERS * N_KVP * N_FILTERS * N_Z];
    for organ in [Organ::Brain, Organ::RedBoneMarrow] {
        for (ai, &age) in PHANTOM_AGES.iter().enumerate() {
            let a = age as f64;
            for gender in [Gender::F, Gender::M] {
                for (ki, &kvp) in KVP_LEVELS.iter().enumerate() {
                    for filter in [Filter::Head16, Filter::Body32] {
                        let pen_exp = match organ {
                            Organ::Brain => 0.85,
                            Organ::RedBoneMarrow => 0.70,
                        };
                        let pen = (kvp as f64 / 120.0).powf(pen_exp);
                        let filt = match (organ, filter) {
                            (_, Filter::Head16) => 1.0,
                            (Organ::Brain, Filter::Body32) => 0.92,
                            (Organ::RedBoneMarrow, Filter::Body32) => 0.95,
                        };
                        for z in 1..=BODY_SLICES {
                            let zf = z as f64;
                            let value = match organ {
                                Organ::Brain => {
                                    // Head-centered bump; heads grow and
                                    // doses per slice shrink with age.
                                    let amp = (1.35 - 0.025 * a) * brain_amp_jitter;
                                    let g = match gender {
                                        Gender::F => 1.07,
                                        Gender::M => 1.0,
                                    };
                                    let center = 13.0 + 0.08 * a;
                                    let sigma = 2.8 + 0.07 * a;
                                    let profile = gaussian(zf, center, sigma)
                                        + 0.02 * gaussian(zf, center, 6.0 * sigma);
                                    amp * g * pen * filt * profile
                                }
                                Organ::RedBoneMarrow => {
                                    // Marrow migrates out of the skull with
                                    // age: head fraction 45% → 10%.
                                    let amp = 6.0 * rbm_amp_jitter;
                                    let g = match gender {
                                        Gender::F => 1.04,
                                        Gender::M => 1.0,
                                    };
                                    let head_frac = 0.45 - (0.35 / 18.0) * a;
                                    let head = gaussian_density(zf, 12.0 + 0.15 * a, 5.5);
                                    let body = gaussian_density(
                                        zf,
                                        60.0 + 2.2 * a,
                                        32.0 + 1.1 * a,
                                    );
                                    amp * g
                                        * pen
                                        * filt
                                        * (head_frac * head + (1.0 - head_frac) * body)
                                }
                            };
                            dc[dc_slot(organ, ai, gender, ki, filter, z)] = value;
                        }
                    }
                }
            }
        }
    }
    DoseTables { nctdiw, dc }
}

/// Latent correlations of the numeric inputs, order (age, start, end, mAs,
/// kVp, pitch): start–end strongly tied, pitch tied to both and traded
/// against kVp, mAs rising with age. Gender and machine model stay
/// independent of everything.
fn scan_latent_correlation() -> Vec<Vec<f64>> {
    vec![
        vec![1.00, 0.00, 0.00, 0.25, 0.00, 0.00],
        vec![0.00, 1.00, 0.82, 0.00, 0.00, 0.46],
        vec![0.00, 0.82, 1.00, 0.00, 0.00, 0.50],
        vec![0.25, 0.00, 0.00, 1.00, 0.00, 0.00],
        vec![0.00, 0.00, 0.00, 0.00, 1.00, -0.40],
        vec![0.00, 0.46, 0.50, 0.00, -0.40, 1.00],
    ]
}

fn uniform_int(u: f64, lo: i64, hi: i64) -> i64 {
    let m = hi - lo + 1;
    lo + ((u * m as f64).floor() as i64).clamp(0, m - 1)
}

/// Weights of the kVp levels 80/100/120/140 (120 is the workhorse setting).
const KVP_CDF: [f64; 3] = [0.12, 0.34, 0.82];

fn map_kvp(u: f64) -> u16 {
    match u {
        u if u < KVP_CDF[0] => 80,
        u if u < KVP_CDF[1] => 100,
        u if u < KVP_CDF[2] => 120,
        _ => 140,
    }
}

fn map_mas(u: f64) -> u16 {
    let (lo, hi) = (4.0f64, 505.0f64);
    let v = (lo.ln() + u * (hi.ln() - lo.ln())).exp();
    (v.round() as i64).clamp(4, 505) as u16
}

/// Draws a scan population of one examination class and evaluates the organ
/// dose for every record. Numeric inputs come from a Gaussian copula over
/// the class windows; gender and machine model are independent draws.
pub fn ncict_sample(
    tables: &DoseTables,
    organ: Organ,
    exam_class: ExamClass,
    n: usize,
    seed: u64,
) -> Result<Dataset, ModelError> {
    if n < 100 {
        return Err(ModelError::TooFewSamples { n, min: 100 });
    }
    let mut copula = GaussianCopula::new(&scan_latent_correlation(), seed)?;
    // Pitch concentrates around ~1 (protocols rarely run the extremes).
    let pitch_shape = Beta::new(6.0, 5.0).expect("valid beta");
    let (start_lo, start_hi) = exam_class.start_window();
    let (end_lo, end_hi) = exam_class.end_window();
    let filter = exam_class.filter();

    let mut age = Vec::with_capacity(n);
    let mut gender = Vec::with_capacity(n);
    let mut start = Vec::with_capacity(n);
    let mut end = Vec::with_capacity(n);
    let mut mas = Vec::with_capacity(n);
    let mut kvp = Vec::with_capacity(n);
    let mut pitch = Vec::with_capacity(n);
    let mut model = Vec::with_capacity(n);
    let mut dose = Vec::with_capacity(n);

    for _ in 0..n {
        let u = copula.draw();
        let rec = ScanRecord {
            age: uniform_int(u[0], 0, 18) as u8,
            gender: if copula.draw_independent() < 0.5 {
                Gender::F
            } else {
                Gender::M
            },
            start: uniform_int(u[1], start_lo, start_hi) as u16,
            end: uniform_int(u[2], end_lo, end_hi) as u16,
            mas: map_mas(u[3]),
            kvp: map_kvp(u[4]),
            pitch: 0.2 + 1.55 * pitch_shape.inverse_cdf(u[5]),
            model: uniform_int(copula.draw_independent(), 1, 12) as u8,
        };
        dose.push(organ_dose(&rec, organ, filter, tables)?);
        age.push(rec.age as i64);
        gender.push(gender_index(rec.gender) as u32);
        start.push(rec.start as i64);
        end.push(rec.end as i64);
        mas.push(rec.mas as i64);
        kvp.push(rec.kvp as i64);
        pitch.push(rec.pitch);
        model.push(rec.model as u32 - 1);
    }

    let model_levels: Vec<String> = (1..=12).map(|m| m.to_string()).collect();
    let model_level_refs: Vec<&str> = model_levels.iter().map(|s| s.as_str()).collect();
    let specs = vec![
        ColumnSpec::input("age", ColumnKind::integer_range(0, 18)),
        ColumnSpec::input("gender", ColumnKind::categorical(&["F", "M"])),
        ColumnSpec::input("start", ColumnKind::integer_range(1, 165)),
        ColumnSpec::input("end", ColumnKind::integer_range(1, 165)),
        ColumnSpec::input("mAs", ColumnKind::integer_range(4, 505)),
        ColumnSpec::input("kVp", ColumnKind::integer_set(&[80, 100, 120, 140])),
        ColumnSpec::input("pitch", ColumnKind::numeric_range(0.2, 1.75)),
        ColumnSpec::input("model", ColumnKind::categorical(&model_level_refs)),
    ];
    let inputs = vec![
        ColumnData::Integer(age),
        ColumnData::Categorical(gender),
        ColumnData::Integer(start),
        ColumnData::Integer(end),
        ColumnData::Integer(mas),
        ColumnData::Integer(kvp),
        ColumnData::Numeric(pitch),
        ColumnData::Categorical(model),
    ];
    Ok(Dataset::from_parts(specs, inputs, "dose", dose)?)
}
