//! Scenario configuration: the single input from which an entire simulation
//! run is determined.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actors::obd::ObdParameter;
use crate::contracts::query::QuerySpec;
use crate::contracts::vsrc::Permission;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid config: {0}")]
pub struct InvalidConfig(pub String);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    pub count: usize,
    pub speed_min: f64,
    pub speed_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RsuConfig {
    pub position: f64,
    pub range: f64,
    /// Index into `fog_nodes`.
    pub fog_node: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FogNodeConfig {
    /// Index of the CSP this fog node uplinks to.
    pub csp: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub identity: String,
    /// Registry role; currently always `service_provider`.
    pub role: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointerTemplate {
    pub query: String,
    pub permission: Permission,
    pub expiry: u64,
    pub terms_of_use: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VsrcTemplate {
    /// Index of the vehicle party.
    pub vehicle: usize,
    /// Index into `providers`.
    pub provider: usize,
    pub pointers: Vec<PointerTemplate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub rounds: u64,
    pub road_length: f64,
    pub vehicles: VehicleConfig,
    pub rsus: Vec<RsuConfig>,
    pub fog_nodes: Vec<FogNodeConfig>,
    pub csps: usize,
    pub providers: Vec<ProviderConfig>,
    /// Proof-of-work difficulty in leading zero bits, fixed for the run.
    pub difficulty: u32,
    pub miner_hashes_per_round: u64,
    pub max_block_txs: usize,
    pub confirmation_depth: u64,
    /// Telemetry records logged per vehicle per round.
    pub record_rate: u32,
    pub vsrc_templates: Vec<VsrcTemplate>,
    pub message_drop_probability: f64,
    /// Rounds between access requests from each provider.
    #[serde(default = "default_access_request_interval")]
    pub access_request_interval: u64,
    /// Cap on records per packaged data block.
    #[serde(default = "default_max_records_per_upload")]
    pub max_records_per_upload: usize,
}

fn default_access_request_interval() -> u64 {
    10
}

fn default_max_records_per_upload() -> usize {
    64
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), InvalidConfig> {
        let err = |msg: String| Err(InvalidConfig(msg));
        if self.road_length <= 0.0 || !self.road_length.is_finite() {
            return err(format!("road_length must be positive, got {}", self.road_length));
        }
        if self.vehicles.count > 0 {
            if !(self.vehicles.speed_min.is_finite() && self.vehicles.speed_max.is_finite())
                || self.vehicles.speed_min < 0.0
                || self.vehicles.speed_min > self.vehicles.speed_max
            {
                return err(format!(
                    "vehicle speed range [{}, {}] is not a valid non-negative interval",
                    self.vehicles.speed_min, self.vehicles.speed_max
                ));
            }
        }
        if self.vehicles.count > 0 && self.record_rate > 0 && self.csps == 0 {
            return err("vehicles are configured to upload but no CSP exists".to_string());
        }
        if self.record_rate as usize > ObdParameter::ALL.len() {
            return err(format!(
                "record_rate {} exceeds the {} supported parameters",
                self.record_rate,
                ObdParameter::ALL.len()
            ));
        }
        for (i, rsu) in self.rsus.iter().enumerate() {
            if !(0.0..self.road_length).contains(&rsu.position) {
                return err(format!("rsu {i} position {} outside the road", rsu.position));
            }
            if rsu.range < 0.0 || !rsu.range.is_finite() {
                return err(format!("rsu {i} range {} is invalid", rsu.range));
            }
            if rsu.fog_node >= self.fog_nodes.len() {
                return err(format!("rsu {i} references missing fog node {}", rsu.fog_node));
            }
        }
        for (i, fog) in self.fog_nodes.iter().enumerate() {
            if fog.csp >= self.csps {
                return err(format!("fog node {i} references missing csp {}", fog.csp));
            }
        }
        for (i, provider) in self.providers.iter().enumerate() {
            if provider.role != "service_provider" {
                return err(format!(
                    "provider {i} role '{}' is not registrable (expected 'service_provider')",
                    provider.role
                ));
            }
            if provider.identity.is_empty() {
                return err(format!("provider {i} has an empty identity"));
            }
        }
        if self.difficulty > 30 {
            return err(format!("difficulty {} exceeds the supported 30 bits", self.difficulty));
        }
        if self.max_block_txs == 0 {
            return err("max_block_txs must be at least 1".to_string());
        }
        if self.max_records_per_upload == 0 {
            return err("max_records_per_upload must be at least 1".to_string());
        }
        if !(0.0..=1.0).contains(&self.message_drop_probability) {
            return err(format!(
                "message_drop_probability {} outside [0, 1]",
                self.message_drop_probability
            ));
        }
        if self.access_request_interval == 0 {
            return err("access_request_interval must be at least 1".to_string());
        }
        for (i, tpl) in self.vsrc_templates.iter().enumerate() {
            if tpl.vehicle >= self.vehicles.count {
                return err(format!("vsrc template {i} references missing vehicle {}", tpl.vehicle));
            }
            if tpl.provider >= self.providers.len() {
                return err(format!(
                    "vsrc template {i} references missing provider {}",
                    tpl.provider
                ));
            }
            if tpl.pointers.is_empty() {
                return err(format!("vsrc template {i} has no pointers"));
            }
            for (j, pointer) in tpl.pointers.iter().enumerate() {
                QuerySpec::parse(&pointer.query).map_err(|e| {
                    InvalidConfig(format!("vsrc template {i} pointer {j}: {e}"))
                })?;
            }
        }
        Ok(())
    }

    /// The fixed benchmark scenario: 50 vehicles, 5 RSUs, 3 fog nodes,
    /// 3 CSPs, difficulty 12, 200 rounds, seed 42.
    pub fn reference() -> Self {
        let providers = vec![
            ProviderConfig {
                identity: "INS-000".to_string(),
                role: "service_provider".to_string(),
            },
            ProviderConfig {
                identity: "MFR-000".to_string(),
                role: "service_provider".to_string(),
            },
        ];
        // Every provider gets a telemetry window on the first ten vehicles.
        let mut vsrc_templates = Vec::new();
        for provider in 0..providers.len() {
            for vehicle in 0..10 {
                vsrc_templates.push(VsrcTemplate {
                    vehicle,
                    provider,
                    pointers: vec![PointerTemplate {
                        query: "select vehicle_speed,engine_rpm,coolant_temp,fuel_level,dtc_count from 0 to 1000000".to_string(),
                        permission: Permission::Allow,
                        expiry: 1_000_000,
                        terms_of_use: "diagnostics and insurance scoring".to_string(),
                    }],
                });
            }
        }
        ScenarioConfig {
            seed: 42,
            rounds: 200,
            road_length: 10_000.0,
            vehicles: VehicleConfig {
                count: 50,
                speed_min: 40.0,
                speed_max: 160.0,
            },
            rsus: (0..5)
                .map(|i| RsuConfig {
                    position: i as f64 * 2_000.0,
                    range: 300.0,
                    fog_node: i % 3,
                })
                .collect(),
            fog_nodes: (0..3).map(|i| FogNodeConfig { csp: i }).collect(),
            csps: 3,
            providers,
            difficulty: 12,
            miner_hashes_per_round: 200,
            max_block_txs: 64,
            confirmation_depth: 2,
            record_rate: 1,
            vsrc_templates,
            message_drop_probability: 0.0,
            access_request_interval: 10,
            max_records_per_upload: 64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_is_valid() {
        ScenarioConfig::reference().validate().unwrap();
    }

    #[test]
    fn uploading_vehicles_require_a_csp() {
        let mut config = ScenarioConfig::reference();
        config.csps = 0;
        config.fog_nodes.clear();
        config.rsus.clear();
        config.vsrc_templates.clear();
        assert!(config.validate().is_err());
    }

    #[test]
    fn probabilities_must_be_in_unit_interval() {
        let mut config = ScenarioConfig::reference();
        config.message_drop_probability = 1.5;
        assert!(config.validate().is_err());
    }

    #[test]
    fn dangling_fog_reference_is_rejected() {
        let mut config = ScenarioConfig::reference();
        config.rsus[0].fog_node = 99;
        assert!(config.validate().is_err());
    }

    #[test]
    fn extension_fields_default_when_absent() {
        let mut value = serde_json::to_value(ScenarioConfig::reference()).unwrap();
        let obj = value.as_object_mut().unwrap();
        obj.remove("access_request_interval");
        obj.remove("max_records_per_upload");
        let parsed: ScenarioConfig = serde_json::from_value(value).unwrap();
        assert_eq!(parsed.access_request_interval, 10);
        assert_eq!(parsed.max_records_per_upload, 64);
    }
}
