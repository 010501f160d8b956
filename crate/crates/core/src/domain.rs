//! Shared vocabulary: patients, momentary context, intervention properties,
//! MAT scores and the feature schema.
//!
//! Every model input is reduced to a small integer *code*: ordinal features
//! carry their value, nominal features the index of their level in
//! declaration order, and the identifier feature the raw patient id. Schemas,
//! encoders, forests and the counterfactual search all agree on this
//! representation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound of every 0–4 ordinal scale (MAT components, affect, load, dose).
pub const LEVEL_MAX: u8 = 4;
/// Largest possible MAT product and therefore largest meaningful threshold.
pub const THRESHOLD_MAX: u8 = 64;
pub const AGE_MIN: u8 = 18;
pub const AGE_MAX: u8 = 90;

macro_rules! categorical {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $label)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];
            pub const LABELS: &'static [&'static str] = &[$($label),+];

            pub fn label(self) -> &'static str {
                Self::LABELS[self.code() as usize]
            }

            pub fn code(self) -> u32 {
                self as u32
            }

            pub fn from_code(code: u32) -> Option<Self> {
                Self::ALL.get(code as usize).copied()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                Self::LABELS
                    .iter()
                    .position(|l| *l == s)
                    .map(|i| Self::ALL[i])
                    .ok_or_else(|| {
                        Error::schema(stringify!($name), format!("unknown level `{s}`"))
                    })
            }
        }
    };
}

categorical!(Gender { Female => "female", Male => "male", Other => "other" });
categorical!(Motion { Stationary => "stationary", Walking => "walking", InVehicle => "in_vehicle" });
categorical!(Location { Home => "home", Work => "work", Outside => "outside" });
categorical!(TimeOfDay { Morning => "morning", Afternoon => "afternoon", Evening => "evening" });
categorical!(DayOfWeek {
    Mon => "mon", Tue => "tue", Wed => "wed", Thu => "thu", Fri => "fri", Sat => "sat", Sun => "sun",
});
categorical!(ActivityType {
    Walk => "walk",
    Meditation => "meditation",
    Yoga => "yoga",
    TaiChi => "tai_chi",
    PositiveThinking => "positive_thinking",
});
categorical!(DeliverySchedule {
    FixedMorning => "fixed_morning",
    FixedEvening => "fixed_evening",
    ContextTriggered => "context_triggered",
});
categorical!(MessagePhrasing { Neutral => "neutral", Encouraging => "encouraging", Authoritative => "authoritative" });
categorical!(MessageContent {
    ReminderOnly => "reminder_only",
    MotivationalBenefit => "motivational_benefit",
    AbilityPlanning => "ability_planning",
});

fn check_range(field: &str, value: u32, min: u32, max: u32) -> Result<()> {
    if value < min || value > max {
        return Err(Error::schema(
            field,
            format!("value {value} outside [{min}, {max}]"),
        ));
    }
    Ok(())
}

/// Fixed, observable patient characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientTraits {
    pub patient_id: u32,
    pub age: u8,
    pub gender: Gender,
    pub motivation_at_enrollment: u8,
}

impl PatientTraits {
    pub fn validate(&self) -> Result<()> {
        check_range("age", self.age.into(), AGE_MIN.into(), AGE_MAX.into())?;
        check_range(
            "motivation_at_enrollment",
            self.motivation_at_enrollment.into(),
            0,
            LEVEL_MAX.into(),
        )
    }
}

/// A simulated patient: observable traits plus the hidden action threshold
/// that encodes general receptivity (higher means less receptive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatientProfile {
    #[serde(flatten)]
    pub traits: PatientTraits,
    pub action_threshold: u8,
}

impl PatientProfile {
    pub fn validate(&self) -> Result<()> {
        self.traits.validate()?;
        check_range(
            "action_threshold",
            self.action_threshold.into(),
            0,
            THRESHOLD_MAX.into(),
        )
    }
}

/// Momentary internal (affect, cognitive load) and external state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Context {
    /// 0 = very negative, 4 = very positive.
    pub affect: u8,
    pub cognitive_load: u8,
    pub motion: Motion,
    pub location: Location,
    pub time_of_day: TimeOfDay,
    pub day_of_week: DayOfWeek,
}

impl Context {
    pub fn validate(&self) -> Result<()> {
        check_range("affect", self.affect.into(), 0, LEVEL_MAX.into())?;
        check_range("cognitive_load", self.cognitive_load.into(), 0, LEVEL_MAX.into())
    }
}

/// Intervention properties; the only surface personalisation may change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BciSpec {
    pub activity_type: ActivityType,
    /// Intensity/duration bucket, 0 = lightest.
    pub dose: u8,
    pub delivery_schedule: DeliverySchedule,
    pub message_phrasing: MessagePhrasing,
    pub message_content: MessageContent,
}

impl BciSpec {
    pub fn validate(&self) -> Result<()> {
        check_range("dose", self.dose.into(), 0, LEVEL_MAX.into())
    }
}

/// Motivation, ability and trigger scores, each in 0..=4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatVector {
    pub motivation: u8,
    pub ability: u8,
    pub trigger: u8,
}

impl MatVector {
    pub fn new(motivation: u8, ability: u8, trigger: u8) -> Result<Self> {
        let mat = MatVector {
            motivation,
            ability,
            trigger,
        };
        mat.validate()?;
        Ok(mat)
    }

    pub fn validate(&self) -> Result<()> {
        check_range("mat_m", self.motivation.into(), 0, LEVEL_MAX.into())?;
        check_range("mat_a", self.ability.into(), 0, LEVEL_MAX.into())?;
        check_range("mat_t", self.trigger.into(), 0, LEVEL_MAX.into())
    }

    pub fn product(&self) -> u32 {
        u32::from(self.motivation) * u32::from(self.ability) * u32::from(self.trigger)
    }

    pub fn get(&self, dim: MatDim) -> u8 {
        match dim {
            MatDim::Motivation => self.motivation,
            MatDim::Ability => self.ability,
            MatDim::Trigger => self.trigger,
        }
    }

    pub fn set(&mut self, dim: MatDim, value: u8) {
        match dim {
            MatDim::Motivation => self.motivation = value,
            MatDim::Ability => self.ability = value,
            MatDim::Trigger => self.trigger = value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatDim {
    Motivation,
    Ability,
    Trigger,
}

impl MatDim {
    pub const ALL: [MatDim; 3] = [MatDim::Motivation, MatDim::Ability, MatDim::Trigger];

    pub fn feature(self) -> FeatureId {
        match self {
            MatDim::Motivation => FeatureId::MatM,
            MatDim::Ability => FeatureId::MatA,
            MatDim::Trigger => FeatureId::MatT,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MatDim::Motivation => "motivation",
            MatDim::Ability => "ability",
            MatDim::Trigger => "trigger",
        }
    }
}

/// Everything a model may observe about one patient-day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observation {
    pub patient: PatientTraits,
    pub context: Context,
    pub bci: BciSpec,
}

impl Observation {
    /// Lowest code in every field; a starting point for rebuilding
    /// observations from code vectors.
    pub fn blank() -> Self {
        Observation {
            patient: PatientTraits {
                patient_id: 0,
                age: AGE_MIN,
                gender: Gender::Female,
                motivation_at_enrollment: 0,
            },
            context: Context {
                affect: 0,
                cognitive_load: 0,
                motion: Motion::Stationary,
                location: Location::Home,
                time_of_day: TimeOfDay::Morning,
                day_of_week: DayOfWeek::Mon,
            },
            bci: BciSpec {
                activity_type: ActivityType::Walk,
                dose: 0,
                delivery_schedule: DeliverySchedule::FixedMorning,
                message_phrasing: MessagePhrasing::Neutral,
                message_content: MessageContent::ReminderOnly,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.patient.validate()?;
        self.context.validate()?;
        self.bci.validate()
    }
}

/// One labelled patient-day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample {
    pub observation: Observation,
    /// Ground truth, only known for simulated data.
    pub mat: Option<MatVector>,
    pub behaviour: u8,
    pub day_index: u32,
}

impl Sample {
    pub fn patient_id(&self) -> u32 {
        self.observation.patient.patient_id
    }

    pub fn validate(&self) -> Result<()> {
        self.observation.validate()?;
        if let Some(mat) = &self.mat {
            mat.validate()?;
        }
        check_range("behaviour", self.behaviour.into(), 0, 1)
    }
}

/// Every column a model can consume, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureId {
    PatientId,
    Age,
    Gender,
    MotivationAtEnrollment,
    Affect,
    CognitiveLoad,
    Motion,
    Location,
    TimeOfDay,
    DayOfWeek,
    ActivityType,
    Dose,
    DeliverySchedule,
    MessagePhrasing,
    MessageContent,
    MatM,
    MatA,
    MatT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Ordinal,
    Nominal,
    Identifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutability {
    Immutable,
    MutableBci,
    MutableMat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Inclusive integer range.
    Ordinal { min: u32, max: u32 },
    Nominal(&'static [&'static str]),
    /// Open-ended patient identifiers.
    Identifier,
}

impl Domain {
    pub fn contains(&self, code: u32) -> bool {
        match *self {
            Domain::Ordinal { min, max } => (min..=max).contains(&code),
            Domain::Nominal(levels) => (code as usize) < levels.len(),
            Domain::Identifier => true,
        }
    }

    /// All codes in declaration order; `None` for identifiers.
    pub fn codes(&self) -> Option<Vec<u32>> {
        match *self {
            Domain::Ordinal { min, max } => Some((min..=max).collect()),
            Domain::Nominal(levels) => Some((0..levels.len() as u32).collect()),
            Domain::Identifier => None,
        }
    }
}

const LEVEL: Domain = Domain::Ordinal {
    min: 0,
    max: LEVEL_MAX as u32,
};

impl FeatureId {
    pub const ALL: [FeatureId; 18] = [
        FeatureId::PatientId,
        FeatureId::Age,
        FeatureId::Gender,
        FeatureId::MotivationAtEnrollment,
        FeatureId::Affect,
        FeatureId::CognitiveLoad,
        FeatureId::Motion,
        FeatureId::Location,
        FeatureId::TimeOfDay,
        FeatureId::DayOfWeek,
        FeatureId::ActivityType,
        FeatureId::Dose,
        FeatureId::DeliverySchedule,
        FeatureId::MessagePhrasing,
        FeatureId::MessageContent,
        FeatureId::MatM,
        FeatureId::MatA,
        FeatureId::MatT,
    ];

    pub const BCI: [FeatureId; 5] = [
        FeatureId::ActivityType,
        FeatureId::Dose,
        FeatureId::DeliverySchedule,
        FeatureId::MessagePhrasing,
        FeatureId::MessageContent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureId::PatientId => "patient_id",
            FeatureId::Age => "age",
            FeatureId::Gender => "gender",
            FeatureId::MotivationAtEnrollment => "motivation_at_enrollment",
            FeatureId::Affect => "affect",
            FeatureId::CognitiveLoad => "cognitive_load",
            FeatureId::Motion => "motion",
            FeatureId::Location => "location",
            FeatureId::TimeOfDay => "time_of_day",
            FeatureId::DayOfWeek => "day_of_week",
            FeatureId::ActivityType => "activity_type",
            FeatureId::Dose => "dose",
            FeatureId::DeliverySchedule => "delivery_schedule",
            FeatureId::MessagePhrasing => "message_phrasing",
            FeatureId::MessageContent => "message_content",
            FeatureId::MatM => "mat_m",
            FeatureId::MatA => "mat_a",
            FeatureId::MatT => "mat_t",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn kind(self) -> FeatureKind {
        match self.domain() {
            Domain::Ordinal { .. } => FeatureKind::Ordinal,
            Domain::Nominal(_) => FeatureKind::Nominal,
            Domain::Identifier => FeatureKind::Identifier,
        }
    }

    pub fn domain(self) -> Domain {
        match self {
            FeatureId::PatientId => Domain::Identifier,
            FeatureId::Age => Domain::Ordinal {
                min: AGE_MIN.into(),
                max: AGE_MAX.into(),
            },
            FeatureId::Gender => Domain::Nominal(Gender::LABELS),
            FeatureId::MotivationAtEnrollment
            | FeatureId::Affect
            | FeatureId::CognitiveLoad
            | FeatureId::Dose
            | FeatureId::MatM
            | FeatureId::MatA
            | FeatureId::MatT => LEVEL,
            FeatureId::Motion => Domain::Nominal(Motion::LABELS),
            FeatureId::Location => Domain::Nominal(Location::LABELS),
            FeatureId::TimeOfDay => Domain::Nominal(TimeOfDay::LABELS),
            FeatureId::DayOfWeek => Domain::Nominal(DayOfWeek::LABELS),
            FeatureId::ActivityType => Domain::Nominal(ActivityType::LABELS),
            FeatureId::DeliverySchedule => Domain::Nominal(DeliverySchedule::LABELS),
            FeatureId::MessagePhrasing => Domain::Nominal(MessagePhrasing::LABELS),
            FeatureId::MessageContent => Domain::Nominal(MessageContent::LABELS),
        }
    }

    pub fn mutability(self) -> Mutability {
        match self {
            FeatureId::ActivityType
            | FeatureId::Dose
            | FeatureId::DeliverySchedule
            | FeatureId::MessagePhrasing
            | FeatureId::MessageContent => Mutability::MutableBci,
            FeatureId::MatM | FeatureId::MatA | FeatureId::MatT => Mutability::MutableMat,
            _ => Mutability::Immutable,
        }
    }

    pub fn is_bci(self) -> bool {
        self.mutability() == Mutability::MutableBci
    }

    /// Human-readable value for a code, e.g. `"walking"` or `"3"`.
    pub fn render(self, code: u32) -> String {
        match self.domain() {
            Domain::Nominal(levels) => levels
                .get(code as usize)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("?{code}")),
            _ => code.to_string(),
        }
    }

    /// Inverse of [`render`](Self::render), with domain validation.
    pub fn parse(self, text: &str) -> Result<u32> {
        let code = match self.domain() {
            Domain::Nominal(levels) => levels
                .iter()
                .position(|l| *l == text)
                .map(|i| i as u32)
                .ok_or_else(|| Error::schema(self.name(), format!("unknown level `{text}`")))?,
            _ => text
                .parse::<u32>()
                .map_err(|_| Error::schema(self.name(), format!("`{text}` is not an integer")))?,
        };
        self.check(code)?;
        Ok(code)
    }

    pub fn check(self, code: u32) -> Result<()> {
        if self.domain().contains(code) {
            Ok(())
        } else {
            Err(Error::schema(
                self.name(),
                format!("value {} outside domain", self.render(code)),
            ))
        }
    }

    pub fn descriptor(self) -> FeatureDescriptor {
        FeatureDescriptor {
            id: self,
            kind: self.kind(),
            domain: self.domain(),
            mutability: self.mutability(),
        }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureDescriptor {
    pub id: FeatureId,
    pub kind: FeatureKind,
    pub domain: Domain,
    pub mutability: Mutability,
}

impl FeatureDescriptor {
    pub fn name(&self) -> &'static str {
        self.id.name()
    }
}

/// Ordered list of model features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    features: Vec<FeatureDescriptor>,
}

/// The canonical schema: patient id, traits, context and intervention.
pub fn schema_default() -> FeatureSchema {
    FeatureSchema::from_ids(FeatureId::ALL[..15].iter().copied())
}

impl FeatureSchema {
    pub fn from_ids(ids: impl IntoIterator<Item = FeatureId>) -> Self {
        FeatureSchema {
            features: ids.into_iter().map(FeatureId::descriptor).collect(),
        }
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let ids = names
            .iter()
            .map(|n| FeatureId::from_name(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let mut seen = ids.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != ids.len() {
            return Err(Error::InvalidConfig("duplicate feature in schema".into()));
        }
        Ok(Self::from_ids(ids))
    }

    /// Traits, context and intervention features; no identifier, no MAT.
    pub fn observation() -> Self {
        Self::from_ids(FeatureId::ALL[1..15].iter().copied())
    }

    /// Inputs of a direct behaviour model.
    pub fn behaviour_inputs(include_patient_id: bool) -> Self {
        if include_patient_id {
            schema_default()
        } else {
            Self::observation()
        }
    }

    /// Inputs of the second step of the two-step model.
    pub fn mat_with_id() -> Self {
        Self::from_ids([
            FeatureId::MatM,
            FeatureId::MatA,
            FeatureId::MatT,
            FeatureId::PatientId,
        ])
    }

    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn ids(&self) -> impl Iterator<Item = FeatureId> + '_ {
        self.features.iter().map(|f| f.id)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.features.iter().map(|f| f.name()).collect()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn position(&self, id: FeatureId) -> Option<usize> {
        self.features.iter().position(|f| f.id == id)
    }

    pub fn position_of(&self, name: &str) -> Result<usize> {
        let id = FeatureId::from_name(name)?;
        self.position(id)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn contains(&self, id: FeatureId) -> bool {
        self.position(id).is_some()
    }

    /// Number of non-identifier features.
    pub fn model_feature_count(&self) -> usize {
        self.features
            .iter()
            .filter(|f| f.kind != FeatureKind::Identifier)
            .count()
    }

    /// Codes of one sample in schema order.
    pub fn codes(&self, sample: &Sample) -> Result<Vec<u32>> {
        self.features
            .iter()
            .map(|f| sample_code(sample, f.id))
            .collect()
    }

    pub fn observation_codes(&self, obs: &Observation) -> Result<Vec<u32>> {
        self.features
            .iter()
            .map(|f| observation_code(obs, f.id).ok_or(Error::MissingMat))
            .collect()
    }

    pub fn validate_codes(&self, codes: &[u32]) -> Result<()> {
        if codes.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: codes.len(),
            });
        }
        self.features
            .iter()
            .zip(codes)
            .try_for_each(|(f, &c)| f.id.check(c))
    }
}

/// Code of a feature for an observation; `None` for MAT columns.
pub fn observation_code(obs: &Observation, id: FeatureId) -> Option<u32> {
    let p = &obs.patient;
    let c = &obs.context;
    let b = &obs.bci;
    Some(match id {
        FeatureId::PatientId => p.patient_id,
        FeatureId::Age => p.age.into(),
        FeatureId::Gender => p.gender.code(),
        FeatureId::MotivationAtEnrollment => p.motivation_at_enrollment.into(),
        FeatureId::Affect => c.affect.into(),
        FeatureId::CognitiveLoad => c.cognitive_load.into(),
        FeatureId::Motion => c.motion.code(),
        FeatureId::Location => c.location.code(),
        FeatureId::TimeOfDay => c.time_of_day.code(),
        FeatureId::DayOfWeek => c.day_of_week.code(),
        FeatureId::ActivityType => b.activity_type.code(),
        FeatureId::Dose => b.dose.into(),
        FeatureId::DeliverySchedule => b.delivery_schedule.code(),
        FeatureId::MessagePhrasing => b.message_phrasing.code(),
        FeatureId::MessageContent => b.message_content.code(),
        FeatureId::MatM | FeatureId::MatA | FeatureId::MatT => return None,
    })
}

pub fn sample_code(sample: &Sample, id: FeatureId) -> Result<u32> {
    match id {
        FeatureId::MatM | FeatureId::MatA | FeatureId::MatT => {
            let mat = sample.mat.ok_or(Error::MissingMat)?;
            Ok(u32::from(match id {
                FeatureId::MatM => mat.motivation,
                FeatureId::MatA => mat.ability,
                _ => mat.trigger,
            }))
        }
        _ => Ok(observation_code(&sample.observation, id).expect("non-MAT feature")),
    }
}

fn small(id: FeatureId, code: u32) -> Result<u8> {
    id.check(code)?;
    u8::try_from(code).map_err(|_| Error::schema(id.name(), format!("value {code} too large")))
}

fn level<T>(id: FeatureId, code: u32, from: fn(u32) -> Option<T>) -> Result<T> {
    from(code).ok_or_else(|| Error::schema(id.name(), format!("code {code} outside domain")))
}

/// Writes `code` into the field named by `id`. MAT columns are rejected.
pub fn set_observation_code(obs: &mut Observation, id: FeatureId, code: u32) -> Result<()> {
    let p = &mut obs.patient;
    let c = &mut obs.context;
    let b = &mut obs.bci;
    match id {
        FeatureId::PatientId => p.patient_id = code,
        FeatureId::Age => p.age = small(id, code)?,
        FeatureId::Gender => p.gender = level(id, code, Gender::from_code)?,
        FeatureId::MotivationAtEnrollment => p.motivation_at_enrollment = small(id, code)?,
        FeatureId::Affect => c.affect = small(id, code)?,
        FeatureId::CognitiveLoad => c.cognitive_load = small(id, code)?,
        FeatureId::Motion => c.motion = level(id, code, Motion::from_code)?,
        FeatureId::Location => c.location = level(id, code, Location::from_code)?,
        FeatureId::TimeOfDay => c.time_of_day = level(id, code, TimeOfDay::from_code)?,
        FeatureId::DayOfWeek => c.day_of_week = level(id, code, DayOfWeek::from_code)?,
        FeatureId::ActivityType => b.activity_type = level(id, code, ActivityType::from_code)?,
        FeatureId::Dose => b.dose = small(id, code)?,
        FeatureId::DeliverySchedule => {
            b.delivery_schedule = level(id, code, DeliverySchedule::from_code)?
        }
        FeatureId::MessagePhrasing => {
            b.message_phrasing = level(id, code, MessagePhrasing::from_code)?
        }
        FeatureId::MessageContent => b.message_content = level(id, code, MessageContent::from_code)?,
        FeatureId::MatM | FeatureId::MatA | FeatureId::MatT => {
            return Err(Error::schema(id.name(), "MAT columns are not observation fields"))
        }
    }
    Ok(())
}

/// Rebuilds an observation from codes laid out in `schema` order, starting
/// from `base` for any field the schema does not cover.
pub fn observation_from_codes(
    schema: &FeatureSchema,
    codes: &[u32],
    base: &Observation,
) -> Result<Observation> {
    schema.validate_codes(codes)?;
    let mut obs = *base;
    for (f, &code) in schema.features().iter().zip(codes) {
        if !matches!(f.id, FeatureId::MatM | FeatureId::MatA | FeatureId::MatT) {
            set_observation_code(&mut obs, f.id, code)?;
        }
    }
    Ok(obs)
}
