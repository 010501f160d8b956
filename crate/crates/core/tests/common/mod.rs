#![allow(dead_code)]

use proptest::prelude::*;

use nudge_core::domain::{
    ActivityType, BciSpec, Context, DayOfWeek, DeliverySchedule, Gender, Location,
    MessageContent, MessagePhrasing, Motion, Observation, PatientTraits, TimeOfDay,
};

fn pick<T: Copy + std::fmt::Debug + 'static>(all: &'static [T]) -> impl Strategy<Value = T> {
    (0..all.len()).prop_map(move |i| all[i])
}

pub fn observation() -> impl Strategy<Value = Observation> {
    let patient = (0u32..50, 18u8..=90, pick(Gender::ALL), 0u8..=4).prop_map(
        |(patient_id, age, gender, motivation_at_enrollment)| PatientTraits {
            patient_id,
            age,
            gender,
            motivation_at_enrollment,
        },
    );
    let context = (
        0u8..=4,
        0u8..=4,
        pick(Motion::ALL),
        pick(Location::ALL),
        pick(TimeOfDay::ALL),
        pick(DayOfWeek::ALL),
    )
        .prop_map(|(affect, cognitive_load, motion, location, time_of_day, day_of_week)| Context {
            affect,
            cognitive_load,
            motion,
            location,
            time_of_day,
            day_of_week,
        });
    let bci = (
        pick(ActivityType::ALL),
        0u8..=4,
        pick(DeliverySchedule::ALL),
        pick(MessagePhrasing::ALL),
        pick(MessageContent::ALL),
    )
        .prop_map(
            |(activity_type, dose, delivery_schedule, message_phrasing, message_content)| BciSpec {
                activity_type,
                dose,
                delivery_schedule,
                message_phrasing,
                message_content,
            },
        );
    (patient, context, bci).prop_map(|(patient, context, bci)| Observation { patient, context, bci })
}

/// The MAT mapping written out from its definition, independently of the
/// simulator.
pub fn reference_mat(obs: &Observation) -> (u8, u8, u8) {
    let clamp = |x: i32| x.clamp(0, 4) as u8;
    let (c, b) = (&obs.context, &obs.bci);
    let affect = match c.affect {
        0 | 1 => -1,
        2 => 0,
        _ => 1,
    };
    let benefit = i32::from(b.message_content == MessageContent::MotivationalBenefit);
    let m = clamp(i32::from(obs.patient.motivation_at_enrollment) + affect + benefit);

    let planning = i32::from(b.message_content == MessageContent::AbilityPlanning);
    let load = i32::from(c.cognitive_load >= 3);
    let away = i32::from(
        [ActivityType::Yoga, ActivityType::TaiChi, ActivityType::Meditation].contains(&b.activity_type)
            && c.location != Location::Home,
    );
    let a = clamp(4 - i32::from(b.dose) + planning - load - away);

    let triggered = i32::from(b.delivery_schedule == DeliverySchedule::ContextTriggered);
    let timed = i32::from(matches!(
        (b.delivery_schedule, c.time_of_day),
        (DeliverySchedule::FixedMorning, TimeOfDay::Morning) | (DeliverySchedule::FixedEvening, TimeOfDay::Evening)
    ));
    let encouraging = i32::from(b.message_phrasing == MessagePhrasing::Encouraging);
    let vehicle = i32::from(c.motion == Motion::InVehicle);
    let t = clamp(2 + triggered + timed + encouraging - vehicle);
    (m, a, t)
}
