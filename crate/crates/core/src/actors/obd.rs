//! OBD-II telemetry records, the supported parameter set, and the fixed
//! threshold rules that stand in for real diagnostic analytics.

use serde::{Deserialize, Serialize};

use crate::crypto::Address;

/// The supported OBD-II parameters. Value ranges follow the SAE J1979
/// encodings for the corresponding PIDs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObdParameter {
    VehicleSpeed,
    EngineRpm,
    CoolantTemp,
    ThrottlePosition,
    FuelLevel,
    DtcCount,
}

impl ObdParameter {
    pub const ALL: [ObdParameter; 6] = [
        ObdParameter::VehicleSpeed,
        ObdParameter::EngineRpm,
        ObdParameter::CoolantTemp,
        ObdParameter::ThrottlePosition,
        ObdParameter::FuelLevel,
        ObdParameter::DtcCount,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ObdParameter::VehicleSpeed => "vehicle_speed",
            ObdParameter::EngineRpm => "engine_rpm",
            ObdParameter::CoolantTemp => "coolant_temp",
            ObdParameter::ThrottlePosition => "throttle_position",
            ObdParameter::FuelLevel => "fuel_level",
            ObdParameter::DtcCount => "dtc_count",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Inclusive (min, max) of the parameter's value in its natural unit.
    pub fn range(&self) -> (f64, f64) {
        match self {
            ObdParameter::VehicleSpeed => (0.0, 255.0),      // km/h, PID 0x0D
            ObdParameter::EngineRpm => (0.0, 16383.75),      // rpm, PID 0x0C
            ObdParameter::CoolantTemp => (-40.0, 215.0),     // deg C, PID 0x05
            ObdParameter::ThrottlePosition => (0.0, 100.0),  // %, PID 0x11
            ObdParameter::FuelLevel => (0.0, 100.0),         // %, PID 0x2F
            ObdParameter::DtcCount => (0.0, 127.0),          // PID 0x01
        }
    }
}

/// One logged telemetry sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObdRecord {
    pub parameter: ObdParameter,
    /// Simulation round at which the sample was taken.
    pub timestamp: u64,
    pub value: f64,
}

impl ObdRecord {
    pub fn value_in_range(&self) -> bool {
        let (lo, hi) = self.parameter.range();
        self.value.is_finite() && self.value >= lo && self.value <= hi
    }

    /// Ordering key used everywhere records are sorted: round first, then
    /// parameter name.
    pub fn sort_key(&self) -> (u64, &'static str) {
        (self.timestamp, self.parameter.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertSeverity {
    Info,
    Warning,
    Critical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Alert {
    pub parameter: ObdParameter,
    pub round: u64,
    pub rule_id: String,
    pub severity: AlertSeverity,
    pub value: f64,
    pub vehicle: Address,
}

enum Bound {
    Above(f64),
    Below(f64),
    AboveOrEqual(f64),
}

struct AlertRule {
    rule_id: &'static str,
    parameter: ObdParameter,
    bound: Bound,
    severity: AlertSeverity,
}

/// The fixed rule table. Deliberately small: real diagnostics and
/// prognostics live with the service providers, not in this simulator.
const ALERT_RULES: [AlertRule; 4] = [
    AlertRule {
        rule_id: "coolant_overheat",
        parameter: ObdParameter::CoolantTemp,
        bound: Bound::Above(110.0),
        severity: AlertSeverity::Critical,
    },
    AlertRule {
        rule_id: "rpm_redline",
        parameter: ObdParameter::EngineRpm,
        bound: Bound::Above(6500.0),
        severity: AlertSeverity::Warning,
    },
    AlertRule {
        rule_id: "low_fuel",
        parameter: ObdParameter::FuelLevel,
        bound: Bound::Below(10.0),
        severity: AlertSeverity::Info,
    },
    AlertRule {
        rule_id: "dtc_present",
        parameter: ObdParameter::DtcCount,
        bound: Bound::AboveOrEqual(1.0),
        severity: AlertSeverity::Warning,
    },
];

impl AlertRule {
    fn fires_on(&self, record: &ObdRecord) -> bool {
        if record.parameter != self.parameter {
            return false;
        }
        match self.bound {
            Bound::Above(t) => record.value > t,
            Bound::Below(t) => record.value < t,
            Bound::AboveOrEqual(t) => record.value >= t,
        }
    }
}

/// Applies the threshold table to a record set. One alert per (rule, record)
/// firing; records are scanned in the given order and rules in table order,
/// so the output order is deterministic.
pub fn analyze_and_alert(vehicle: Address, records: &[ObdRecord]) -> Vec<Alert> {
    let mut alerts = Vec::new();
    for record in records {
        for rule in &ALERT_RULES {
            if rule.fires_on(record) {
                alerts.push(Alert {
                    parameter: record.parameter,
                    round: record.timestamp,
                    rule_id: rule.rule_id.to_string(),
                    severity: rule.severity,
                    value: record.value,
                    vehicle,
                });
            }
        }
    }
    alerts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(parameter: ObdParameter, value: f64) -> ObdRecord {
        ObdRecord {
            parameter,
            timestamp: 3,
            value,
        }
    }

    fn addr() -> Address {
        crate::crypto::generate_keypair(&[1u8; 32]).unwrap().address()
    }

    #[test]
    fn overheating_coolant_raises_critical() {
        let alerts = analyze_and_alert(addr(), &[rec(ObdParameter::CoolantTemp, 120.0)]);
        assert_eq!(alerts.len(), 1);
        assert_eq!(alerts[0].severity, AlertSeverity::Critical);
        assert_eq!(alerts[0].rule_id, "coolant_overheat");
    }

    #[test]
    fn redline_rpm_raises_warning() {
        let alerts = analyze_and_alert(addr(), &[rec(ObdParameter::EngineRpm, 7000.0)]);
        assert_eq!(alerts.len(), 1);
        assert_eq!(alerts[0].severity, AlertSeverity::Warning);
        assert_eq!(alerts[0].rule_id, "rpm_redline");
    }

    #[test]
    fn nominal_records_raise_nothing() {
        let records = [
            rec(ObdParameter::VehicleSpeed, 90.0),
            rec(ObdParameter::CoolantTemp, 85.0),
            rec(ObdParameter::FuelLevel, 60.0),
            rec(ObdParameter::DtcCount, 0.0),
        ];
        assert!(analyze_and_alert(addr(), &records).is_empty());
    }

    #[test]
    fn single_dtc_raises_warning() {
        let alerts = analyze_and_alert(addr(), &[rec(ObdParameter::DtcCount, 1.0)]);
        assert_eq!(alerts.len(), 1);
        assert_eq!(alerts[0].rule_id, "dtc_present");
    }

    #[test]
    fn speed_range_follows_pid_encoding() {
        assert!(rec(ObdParameter::VehicleSpeed, 255.0).value_in_range());
        assert!(!rec(ObdParameter::VehicleSpeed, 300.0).value_in_range());
        assert!(rec(ObdParameter::CoolantTemp, -40.0).value_in_range());
        assert!(!rec(ObdParameter::CoolantTemp, f64::NAN).value_in_range());
    }
}
