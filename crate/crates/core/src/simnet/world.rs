//! The deterministic round-based world: vehicle mobility, RSU contact,
//! message delivery, per-miner chains with fork choice, and contract state
//! replayed from the canonical chain.
//!
//! Every mutable collection is ordered (BTreeMap/Vec) and every random draw
//! comes from a stream derived from the scenario seed, so a world at round r
//! is a pure function of its configuration.

use std::collections::{BTreeMap, BTreeSet};

use crate::actors::csp::{csp_cosign, csp_handle_access, AccessOutcome, CspStore};
use crate::actors::obd::{analyze_and_alert, Alert, AlertSeverity, ObdParameter, ObdRecord};
use crate::actors::provider::request_access;
use crate::actors::vehicle::{DataBlock, VehicleState};
use crate::contracts::activity::AcAction;
use crate::contracts::query::QuerySpec;
use crate::contracts::registry::{Role, TrustedAuthority};
use crate::contracts::state::ContractsState;
use crate::contracts::vsrc::DataPointer;
use crate::crypto::{derive_subseed, Address, Digest, KeyPair};
use crate::encoding::canonical_digest;
use crate::ledger::block::{Block, Chain};
use crate::ledger::fork::compare_chains;
use crate::ledger::mine::{mine_block, try_mine};
use crate::ledger::tx::{AccessLogPayload, Transaction, TxPayload, VsrcDeployPayload};
use crate::ledger::validate::{validate_and_replay, verify_transaction};
use crate::simnet::config::{InvalidConfig, ScenarioConfig};
use crate::simnet::event::{Event, EventRecord};
use crate::simnet::message::{GrantDelivery, MessageEnvelope, MessagePayload};
use crate::simnet::rng::DetRng;

/// Hops from a vehicle to its CSP: vehicle -> RSU -> fog -> cloud.
const VEHICLE_UPLINK_HOPS: u32 = 3;
/// Hops between backbone entities (miners, CSPs, providers).
const BACKBONE_HOPS: u32 = 1;
/// A vehicle packages once this many records have accumulated.
const MIN_PACKAGE_RECORDS: usize = 5;
/// Rounds a vehicle waits before re-sending an unconfirmed upload.
const RESEND_INTERVAL: u64 = 6;

pub struct VehicleSim {
    pub state: VehicleState,
    pub position: f64,
    pub speed: f64,
    pub home_csp: Address,
    pub alerts_received: u64,
    rng: DetRng,
    last_resend: BTreeMap<Digest, u64>,
}

pub struct RsuSim {
    pub address: Address,
    pub position: f64,
    pub range: f64,
    pub fog_index: usize,
}

pub struct CspSim {
    pub keypair: KeyPair,
    pub store: CspStore,
    handled_requests: BTreeSet<Digest>,
    cosigned: BTreeSet<Digest>,
    inbox_blocks: Vec<DataBlock>,
    inbox_drafts: Vec<Transaction>,
    inbox_requests: Vec<Transaction>,
}

pub struct ProviderSim {
    pub keypair: KeyPair,
    rng: DetRng,
    inbox_grants: Vec<GrantDelivery>,
}

pub struct MinerSim {
    pub chain: Chain,
    pub contracts: ContractsState,
    mempool: Vec<Transaction>,
    mempool_ids: BTreeSet<Digest>,
    chain_tx_ids: BTreeSet<Digest>,
    inbox_chains: Vec<Chain>,
}

impl MinerSim {
    fn new(chain: Chain, contracts: ContractsState) -> Self {
        let chain_tx_ids = chain.iter_txs().map(|(_, tx)| tx.tx_id).collect();
        MinerSim {
            chain,
            contracts,
            mempool: Vec::new(),
            mempool_ids: BTreeSet::new(),
            chain_tx_ids,
            inbox_chains: Vec::new(),
        }
    }

    /// Admits a complete, credible transaction into the mempool, oldest
    /// first. Duplicates and anything already mined are ignored.
    fn admit(&mut self, tx: Transaction) -> bool {
        if self.mempool_ids.contains(&tx.tx_id) || self.chain_tx_ids.contains(&tx.tx_id) {
            return false;
        }
        if !tx.is_complete() || verify_transaction(&tx, &self.contracts).is_err() {
            return false;
        }
        self.mempool_ids.insert(tx.tx_id);
        self.mempool.push(tx);
        true
    }

    fn template_txs(&self, max: usize) -> Vec<Transaction> {
        self.mempool
            .iter()
            .filter(|tx| !self.chain_tx_ids.contains(&tx.tx_id))
            .take(max)
            .cloned()
            .collect()
    }

    fn note_mined(&mut self, block: &Block) {
        for tx in &block.transactions {
            self.chain_tx_ids.insert(tx.tx_id);
            self.mempool_ids.remove(&tx.tx_id);
        }
        self.mempool
            .retain(|tx| !self.chain_tx_ids.contains(&tx.tx_id));
    }

    /// Switches to a better chain: recompute the id index and put back any
    /// transactions the abandoned branch had mined that the new one lacks.
    fn adopt(&mut self, chain: Chain, contracts: ContractsState) {
        let new_ids: BTreeSet<Digest> = chain.iter_txs().map(|(_, tx)| tx.tx_id).collect();
        let mut reorged: Vec<Transaction> = Vec::new();
        for (_, tx) in self.chain.iter_txs() {
            if !new_ids.contains(&tx.tx_id) {
                reorged.push(tx.clone());
            }
        }
        let mut mempool = Vec::new();
        let mut mempool_ids = BTreeSet::new();
        for tx in reorged.into_iter().chain(self.mempool.drain(..)) {
            if !new_ids.contains(&tx.tx_id) && mempool_ids.insert(tx.tx_id) {
                mempool.push(tx);
            }
        }
        self.chain = chain;
        self.contracts = contracts;
        self.chain_tx_ids = new_ids;
        self.mempool = mempool;
        self.mempool_ids = mempool_ids;
    }
}

pub struct World {
    pub config: ScenarioConfig,
    pub round: u64,
    pub authority: TrustedAuthority,
    pub ta_address: Address,
    pub vehicles: BTreeMap<Address, VehicleSim>,
    pub vehicle_order: Vec<Address>,
    pub rsus: Vec<RsuSim>,
    pub fog_addresses: Vec<Address>,
    pub csp_addresses: Vec<Address>,
    pub provider_addresses: Vec<Address>,
    pub csps: BTreeMap<Address, CspSim>,
    pub providers: BTreeMap<Address, ProviderSim>,
    pub miners: BTreeMap<Address, MinerSim>,
    /// The observer's canonical chain and its incrementally maintained
    /// contract state.
    pub canonical_chain: Chain,
    pub canonical_state: ContractsState,
    queue: BTreeMap<(u64, u64), MessageEnvelope>,
    next_msg_seq: u64,
    network_rng: DetRng,
    /// Alerts parked at the fog layer until the vehicle next meets an RSU;
    /// entries are (available_at, alert).
    pending_alerts: BTreeMap<Address, Vec<(u64, Alert)>>,
    partition: Option<Vec<BTreeSet<Address>>>,
    /// Validation-by-tip cache; `None` marks a tip that failed validation.
    validated_tips: BTreeMap<Digest, Option<ContractsState>>,
    pub events: Vec<EventRecord>,
    next_event_seq: u64,
    pub total_hash_attempts: u64,
    pub purged_records: u64,
    pub grants: u64,
    pub denials: u64,
    pub alerts_raised: u64,
    pub alerts_delivered: u64,
    pub records_logged: u64,
    pub records_rejected: u64,
    pub uploads_packaged: u64,
    pub messages_sent: u64,
    pub messages_dropped: u64,
}

impl World {
    /// System initiation plus registration: derives the authority from the
    /// scenario seed, mines the genesis block carrying the registry
    /// bootstrap, registers every configured entity, and deploys the initial
    /// relationship contracts.
    pub fn init_system(config: ScenarioConfig) -> Result<World, InvalidConfig> {
        config.validate()?;
        let authority = TrustedAuthority::from_master_seed(derive_subseed(
            &config.seed.to_le_bytes(),
            b"ta-master",
        ));
        let ta_address = authority.address();

        let mut events = Vec::new();
        let mut next_event_seq = 0u64;
        let mut total_hash_attempts = 0u64;
        let log_init_event = |events: &mut Vec<EventRecord>, seq: &mut u64, event: Event| {
            events.push(EventRecord {
                round: 0,
                seq: *seq,
                event,
            });
            *seq += 1;
        };

        let csp_ids: Vec<String> = (0..config.csps).map(|i| format!("CSP-{i:03}")).collect();
        let fog_ids: Vec<String> = (0..config.fog_nodes.len())
            .map(|i| format!("FOG-{i:03}"))
            .collect();
        let rsu_ids: Vec<String> = (0..config.rsus.len()).map(|i| format!("RSU-{i:03}")).collect();
        let provider_ids: Vec<String> = config.providers.iter().map(|p| p.identity.clone()).collect();
        let vehicle_ids: Vec<String> = (0..config.vehicles.count)
            .map(|i| format!("VH-{i:03}"))
            .collect();

        // Genesis carries the registry bootstrap: the authority's own row.
        let (ta_register, _) = authority.build_register_tx("TA", Role::Ta, u64::MAX, 0);
        let genesis = mine_block(&[ta_register], None, config.difficulty, ta_address, 0, 0)
            .map_err(|e| InvalidConfig(format!("genesis mining failed: {e}")))?;
        total_hash_attempts += genesis.header.nonce + 1;
        log_init_event(
            &mut events,
            &mut next_event_seq,
            Event::BlockFound {
                miner: ta_address,
                index: 0,
                hash: genesis.header.hash(),
                attempts: genesis.header.nonce + 1,
                tx_count: 1,
            },
        );
        let mut chain = Chain::new();
        chain.push(genesis);

        // Registrations in role order, then the initial relationship
        // contracts, chunked into blocks.
        let mut keypairs: BTreeMap<String, KeyPair> = BTreeMap::new();
        let mut pending: Vec<Transaction> = Vec::new();
        for (ids, role) in [
            (&csp_ids, Role::Csp),
            (&fog_ids, Role::FogNode),
            (&rsu_ids, Role::Rsu),
            (&provider_ids, Role::ServiceProvider),
            (&vehicle_ids, Role::Vehicle),
        ] {
            for identity in ids {
                let (tx, kp) = authority.build_register_tx(identity, role, u64::MAX, 0);
                keypairs.insert(identity.clone(), kp);
                pending.push(tx);
            }
        }
        for template in &config.vsrc_templates {
            let vehicle_kp = &keypairs[&vehicle_ids[template.vehicle]];
            let provider_kp = &keypairs[&provider_ids[template.provider]];
            let pointers: Vec<DataPointer> = template
                .pointers
                .iter()
                .enumerate()
                .map(|(i, p)| DataPointer {
                    expiry: p.expiry,
                    permission: p.permission,
                    pointer_id: i as u64,
                    query_string: p.query.clone(),
                    terms_of_use: p.terms_of_use.clone(),
                })
                .collect();
            let payload = TxPayload::VsrcDeploy(VsrcDeployPayload {
                pointers,
                provider: provider_kp.address(),
                vehicle: vehicle_kp.address(),
            });
            let mut tx = Transaction::build(payload, vehicle_kp.address(), 0);
            tx.sign_with(vehicle_kp);
            tx.sign_with(provider_kp);
            pending.push(tx);
        }
        for batch in pending.chunks(config.max_block_txs) {
            let parent = chain.tip_header().expect("genesis exists").clone();
            let block = mine_block(batch, Some(&parent), config.difficulty, ta_address, 0, 0)
                .map_err(|e| InvalidConfig(format!("setup mining failed: {e}")))?;
            total_hash_attempts += block.header.nonce + 1;
            log_init_event(
                &mut events,
                &mut next_event_seq,
                Event::BlockFound {
                    miner: ta_address,
                    index: block.header.index,
                    hash: block.header.hash(),
                    attempts: block.header.nonce + 1,
                    tx_count: block.transactions.len(),
                },
            );
            chain.push(block);
        }

        let canonical_state = validate_and_replay(&chain)
            .map_err(|issues| InvalidConfig(format!("setup chain does not validate: {issues:?}")))?;

        let seed = config.seed;
        let mut vehicles = BTreeMap::new();
        let mut vehicle_order = Vec::new();
        for (i, identity) in vehicle_ids.iter().enumerate() {
            let kp = keypairs[identity].clone();
            let address = kp.address();
            let mut rng = DetRng::for_actor(seed, address);
            let position = rng.range_f64(0.0, config.road_length);
            let speed = rng.range_f64(config.vehicles.speed_min, config.vehicles.speed_max);
            let home_csp = if csp_ids.is_empty() {
                ta_address
            } else {
                keypairs[&csp_ids[i % csp_ids.len()]].address()
            };
            vehicle_order.push(address);
            vehicles.insert(
                address,
                VehicleSim {
                    state: VehicleState::new(kp),
                    position,
                    speed,
                    home_csp,
                    alerts_received: 0,
                    rng,
                    last_resend: BTreeMap::new(),
                },
            );
        }

        let rsus: Vec<RsuSim> = config
            .rsus
            .iter()
            .zip(&rsu_ids)
            .map(|(r, identity)| RsuSim {
                address: keypairs[identity].address(),
                position: r.position,
                range: r.range,
                fog_index: r.fog_node,
            })
            .collect();

        let fog_addresses: Vec<Address> = fog_ids.iter().map(|id| keypairs[id].address()).collect();
        let csp_addresses: Vec<Address> = csp_ids.iter().map(|id| keypairs[id].address()).collect();
        let provider_addresses: Vec<Address> =
            provider_ids.iter().map(|id| keypairs[id].address()).collect();

        let mut csps = BTreeMap::new();
        for identity in &csp_ids {
            let kp = keypairs[identity].clone();
            csps.insert(
                kp.address(),
                CspSim {
                    store: CspStore::new(kp.address()),
                    keypair: kp,
                    handled_requests: BTreeSet::new(),
                    cosigned: BTreeSet::new(),
                    inbox_blocks: Vec::new(),
                    inbox_drafts: Vec::new(),
                    inbox_requests: Vec::new(),
                },
            );
        }

        let mut providers = BTreeMap::new();
        for identity in &provider_ids {
            let kp = keypairs[identity].clone();
            let rng = DetRng::for_actor(seed, kp.address());
            providers.insert(
                kp.address(),
                ProviderSim {
                    keypair: kp,
                    rng,
                    inbox_grants: Vec::new(),
                },
            );
        }

        // Fog nodes and CSPs form the miner set.
        let mut miners = BTreeMap::new();
        for address in fog_addresses.iter().chain(csp_addresses.iter()) {
            miners.insert(*address, MinerSim::new(chain.clone(), canonical_state.clone()));
        }

        let mut validated_tips = BTreeMap::new();
        if let Some(tip) = chain.tip_hash() {
            validated_tips.insert(tip, Some(canonical_state.clone()));
        }

        Ok(World {
            network_rng: DetRng::from_context(seed, b"network"),
            config,
            round: 0,
            authority,
            ta_address,
            vehicles,
            vehicle_order,
            rsus,
            fog_addresses,
            csp_addresses,
            provider_addresses,
            csps,
            providers,
            miners,
            canonical_chain: chain,
            canonical_state,
            queue: BTreeMap::new(),
            next_msg_seq: 0,
            pending_alerts: BTreeMap::new(),
            partition: None,
            validated_tips,
            events,
            next_event_seq,
            total_hash_attempts,
            purged_records: 0,
            grants: 0,
            denials: 0,
            alerts_raised: 0,
            alerts_delivered: 0,
            records_logged: 0,
            records_rejected: 0,
            uploads_packaged: 0,
            messages_sent: 0,
            messages_dropped: 0,
        })
    }

    fn log(&mut self, event: Event) {
        self.events.push(EventRecord {
            round: self.round,
            seq: self.next_event_seq,
            event,
        });
        self.next_event_seq += 1;
    }

    /// Splits the listed entities into isolated groups; messages between
    /// different groups are blocked until the partition heals.
    pub fn set_partition(&mut self, groups: Vec<Vec<Address>>) {
        self.partition = Some(
            groups
                .into_iter()
                .map(|g| g.into_iter().collect::<BTreeSet<_>>())
                .collect(),
        );
        self.log(Event::PartitionChanged { active: true });
    }

    /// Heals the partition. Every miner re-broadcasts its chain — the rejoin
    /// path: nodes download the latest history after an absence.
    pub fn clear_partition(&mut self) {
        self.partition = None;
        self.log(Event::PartitionChanged { active: false });
        let miner_addrs: Vec<Address> = self.miners.keys().copied().collect();
        for from in miner_addrs {
            let chain = self.miners[&from].chain.clone();
            self.broadcast_chain(from, chain);
        }
    }

    fn blocked_by_partition(&self, from: Address, to: Address) -> bool {
        let Some(groups) = &self.partition else {
            return false;
        };
        let group_of = |addr: Address| groups.iter().position(|g| g.contains(&addr));
        match (group_of(from), group_of(to)) {
            (Some(a), Some(b)) => a != b,
            _ => false,
        }
    }

    /// Queues a message over `hops` links, drawing one drop decision per
    /// link. Returns true when the message was actually enqueued.
    fn send(&mut self, from: Address, to: Address, hops: u32, payload: MessagePayload) -> bool {
        let kind = payload.kind().to_string();
        if self.blocked_by_partition(from, to) {
            self.log(Event::MessageBlocked { kind, from, to });
            return false;
        }
        let mut dropped_at = None;
        for hop in 0..hops {
            if self.network_rng.chance(self.config.message_drop_probability) {
                dropped_at = Some(hop);
                break;
            }
        }
        if let Some(hop) = dropped_at {
            self.messages_dropped += 1;
            self.log(Event::MessageDropped {
                kind,
                from,
                to,
                hop,
            });
            return false;
        }
        let deliver_at = self.round + hops as u64;
        let seq = self.next_msg_seq;
        self.next_msg_seq += 1;
        self.messages_sent += 1;
        self.log(Event::MessageSent {
            kind,
            from,
            to,
            deliver_at,
        });
        self.queue.insert(
            (deliver_at, seq),
            MessageEnvelope {
                from,
                to,
                deliver_at,
                seq,
                payload,
            },
        );
        true
    }

    fn broadcast_chain(&mut self, from: Address, chain: Chain) {
        let peers: Vec<Address> = self.miners.keys().copied().filter(|m| *m != from).collect();
        for to in peers {
            self.send(from, to, BACKBONE_HOPS, MessagePayload::BlockMsg(chain.clone()));
        }
    }

    /// Broadcasts a completed transaction to every miner. The sender's own
    /// mempool (when the sender mines) is fed directly.
    fn broadcast_tx(&mut self, from: Address, tx: Transaction) {
        let peers: Vec<Address> = self.miners.keys().copied().collect();
        for to in peers {
            if to == from {
                if let Some(miner) = self.miners.get_mut(&to) {
                    miner.admit(tx.clone());
                }
                continue;
            }
            self.send(from, to, BACKBONE_HOPS, MessagePayload::TxMsg(tx.clone()));
        }
    }

    /// Circular distance on the ring road.
    fn ring_distance(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs() % self.config.road_length;
        d.min(self.config.road_length - d)
    }

    fn nearest_rsu_in_range(&self, position: f64) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (i, rsu) in self.rsus.iter().enumerate() {
            let d = self.ring_distance(position, rsu.position);
            if d <= rsu.range && best.map(|(bd, _)| d < bd).unwrap_or(true) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| i)
    }

    /// One simulation round, in the fixed sub-step order: move and log,
    /// uplink, requests, delivery, CSP processing, mining, fork choice,
    /// purge, alerts.
    pub fn step(&mut self) {
        self.step_vehicles_move_and_log();
        self.step_vehicles_uplink();
        self.step_providers_request();
        self.step_deliver_messages();
        self.step_csps_process();
        self.step_miners_mine();
        self.step_miners_adopt();
        self.step_vehicles_purge();
        self.step_alerts();
        self.round += 1;
    }

    /// Runs `rounds` steps from a fresh world.
    pub fn run(config: ScenarioConfig) -> Result<World, InvalidConfig> {
        let rounds = config.rounds;
        let mut world = World::init_system(config)?;
        for _ in 0..rounds {
            world.step();
        }
        Ok(world)
    }

    /// Sub-step 1: mobility plus telemetry logging at the configured rate.
    fn step_vehicles_move_and_log(&mut self) {
        let road = self.config.road_length;
        let rate = self.config.record_rate as usize;
        let round = self.round;
        let order = self.vehicle_order.clone();
        for address in order {
            let mut logged: Vec<(ObdParameter, Result<(), String>)> = Vec::new();
            {
                let vehicle = self.vehicles.get_mut(&address).expect("vehicle exists");
                vehicle.position = (vehicle.position + vehicle.speed).rem_euclid(road);

                // Distinct parameters this round, logged in name order so the
                // (timestamp, parameter) order always advances.
                let mut params: Vec<ObdParameter> = (0..rate)
                    .map(|i| ObdParameter::ALL[(round as usize + i) % ObdParameter::ALL.len()])
                    .collect();
                params.sort_by_key(|p| p.name());
                for parameter in params {
                    let (lo, hi) = parameter.range();
                    // Mostly nominal mid-band values with occasional
                    // full-range excursions so threshold rules fire.
                    let value = if vehicle.rng.chance(0.1) {
                        vehicle.rng.range_f64(lo, hi)
                    } else {
                        let span = hi - lo;
                        vehicle.rng.range_f64(lo + span * 0.3, lo + span * 0.7)
                    };
                    let record = ObdRecord {
                        parameter,
                        timestamp: round,
                        value,
                    };
                    logged.push((
                        parameter,
                        vehicle.state.log_record(record).map_err(|e| e.to_string()),
                    ));
                }
            }
            for (parameter, outcome) in logged {
                match outcome {
                    Ok(()) => {
                        self.records_logged += 1;
                        self.log(Event::RecordLogged {
                            vehicle: address,
                            parameter,
                            timestamp: round,
                        });
                    }
                    Err(reason) => {
                        self.records_rejected += 1;
                        self.log(Event::RecordRejected {
                            vehicle: address,
                            reason,
                        });
                    }
                }
            }
        }
    }

    /// Sub-step 2: vehicles under RSU coverage package new data and re-send
    /// uploads the contacted fog node has not mined yet.
    fn step_vehicles_uplink(&mut self) {
        let order = self.vehicle_order.clone();
        let round = self.round;
        let max_records = self.config.max_records_per_upload;
        for address in order {
            let position = self.vehicles[&address].position;
            let Some(rsu_index) = self.nearest_rsu_in_range(position) else {
                continue;
            };
            let fog_addr = self.fog_addresses[self.rsus[rsu_index].fog_index];
            let home_csp = self.vehicles[&address].home_csp;

            let mut outgoing: Vec<(DataBlock, Transaction, bool)> = Vec::new();
            {
                let registry = &self.canonical_state.registry;
                let fog_chain_ids = &self.miners[&fog_addr].chain_tx_ids;
                let vehicle = self.vehicles.get_mut(&address).expect("vehicle exists");
                if vehicle.state.local_log.len() >= MIN_PACKAGE_RECORDS {
                    if let Ok((block, draft)) =
                        vehicle
                            .state
                            .package_data_block(home_csp, registry, max_records, round)
                    {
                        vehicle.last_resend.insert(draft.tx_id, round);
                        outgoing.push((block, draft, true));
                    }
                }
                let resend_ids: Vec<Digest> = vehicle
                    .state
                    .pending_uploads
                    .iter()
                    .filter(|(tx_id, pending)| {
                        !fog_chain_ids.contains(*tx_id)
                            && round >= pending.packaged_at + RESEND_INTERVAL
                            && vehicle
                                .last_resend
                                .get(*tx_id)
                                .map(|last| round >= last + RESEND_INTERVAL)
                                .unwrap_or(true)
                    })
                    .map(|(tx_id, _)| *tx_id)
                    .collect();
                for tx_id in resend_ids {
                    let pending = &vehicle.state.pending_uploads[&tx_id];
                    outgoing.push((pending.block.clone(), pending.draft_tx.clone(), false));
                    vehicle.last_resend.insert(tx_id, round);
                }
            }
            for (block, draft, is_new) in outgoing {
                if is_new {
                    self.uploads_packaged += 1;
                    self.log(Event::Packaged {
                        vehicle: address,
                        tx: draft.tx_id,
                        seq: block.seq,
                        record_count: block.records.len(),
                    });
                }
                self.send(
                    address,
                    home_csp,
                    VEHICLE_UPLINK_HOPS,
                    MessagePayload::DataBlockMsg(block),
                );
                self.send(address, home_csp, VEHICLE_UPLINK_HOPS, MessagePayload::TxMsg(draft));
            }
        }
    }

    /// Stakeholders issue scheduled access requests for random vehicles.
    fn step_providers_request(&mut self) {
        if self.vehicle_order.is_empty() || self.csp_addresses.is_empty() {
            return;
        }
        let interval = self.config.access_request_interval;
        let order: Vec<Address> = self.provider_addresses.clone();
        let round = self.round;
        for (index, address) in order.iter().enumerate() {
            if round == 0 || (round + index as u64) % interval != 0 {
                continue;
            }
            let (tx, vehicle, csp) = {
                let registry = &self.canonical_state.registry;
                let vehicle_count = self.vehicle_order.len() as u64;
                let provider = self.providers.get_mut(address).expect("provider exists");
                let vehicle_idx = provider.rng.below(vehicle_count) as usize;
                let vehicle = self.vehicle_order[vehicle_idx];
                let csp = self.vehicles[&vehicle].home_csp;

                // 1-3 distinct parameters over a trailing window.
                let param_count = 1 + provider.rng.below(3) as usize;
                let start = provider.rng.below(ObdParameter::ALL.len() as u64) as usize;
                let parameters: Vec<ObdParameter> = (0..param_count)
                    .map(|i| ObdParameter::ALL[(start + i * 2) % ObdParameter::ALL.len()])
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                let time_from = round.saturating_sub(60);
                let query = QuerySpec::new(parameters, time_from, round)
                    .expect("constructed parameters are valid");
                let tx = request_access(&provider.keypair, vehicle, csp, &query, registry, round)
                    .expect("providers are registered at setup");
                (tx, vehicle, csp)
            };
            self.log(Event::RequestIssued {
                requester: *address,
                vehicle,
                csp,
                tx: tx.tx_id,
            });
            self.broadcast_tx(*address, tx);
        }
    }

    /// Sub-step 3: due messages land in their recipients' inboxes.
    fn step_deliver_messages(&mut self) {
        let due: Vec<(u64, u64)> = self
            .queue
            .range((self.round, 0)..=(self.round, u64::MAX))
            .map(|(k, _)| *k)
            .collect();
        for key in due {
            let envelope = self.queue.remove(&key).expect("key listed above");
            let kind = envelope.payload.kind().to_string();
            let (from, to) = (envelope.from, envelope.to);
            match envelope.payload {
                MessagePayload::DataBlockMsg(block) => {
                    if let Some(csp) = self.csps.get_mut(&to) {
                        csp.inbox_blocks.push(block);
                    }
                }
                MessagePayload::TxMsg(tx) => {
                    let is_draft_upload = matches!(&tx.payload, TxPayload::DataUpload(p) if p.csp == to)
                        && !tx.is_complete();
                    let is_request_for_csp =
                        matches!(&tx.payload, TxPayload::AccessRequest(p) if p.csp == to);
                    if is_draft_upload {
                        if let Some(csp) = self.csps.get_mut(&to) {
                            csp.inbox_drafts.push(tx);
                        }
                    } else {
                        if is_request_for_csp {
                            if let Some(csp) = self.csps.get_mut(&to) {
                                csp.inbox_requests.push(tx.clone());
                            }
                        }
                        if let Some(miner) = self.miners.get_mut(&to) {
                            miner.admit(tx);
                        }
                    }
                }
                MessagePayload::BlockMsg(chain) => {
                    if let Some(miner) = self.miners.get_mut(&to) {
                        miner.inbox_chains.push(chain);
                    }
                }
                MessagePayload::AlertMsg(alert) => {
                    self.pending_alerts
                        .entry(to)
                        .or_default()
                        .push((envelope.deliver_at, alert));
                }
                MessagePayload::GrantMsg(delivery) => {
                    if let Some(provider) = self.providers.get_mut(&to) {
                        provider.inbox_grants.push(delivery);
                    }
                }
            }
            self.log(Event::MessageDelivered { kind, from, to });
        }
    }

    /// Sub-step 4: CSPs store blocks, co-sign credible uploads, and answer
    /// access requests against their own replayed contract state.
    fn step_csps_process(&mut self) {
        let order: Vec<Address> = self.csp_addresses.clone();
        let round = self.round;
        for address in order {
            let blocks: Vec<DataBlock> = {
                let csp = self.csps.get_mut(&address).expect("csp exists");
                csp.inbox_blocks.drain(..).collect()
            };
            for block in blocks {
                let csp = self.csps.get_mut(&address).expect("csp exists");
                let _ = csp.store.receive(block);
            }

            let drafts: Vec<Transaction> = {
                let csp = self.csps.get_mut(&address).expect("csp exists");
                csp.inbox_drafts.drain(..).collect()
            };
            for draft in drafts {
                if self.csps[&address].cosigned.contains(&draft.tx_id) {
                    continue;
                }
                let outcome = {
                    let csp = &self.csps[&address];
                    let contracts = &self.miners[&address].contracts;
                    csp_cosign(&csp.store, &csp.keypair, &draft, contracts)
                };
                match outcome {
                    Ok(completed) => {
                        self.csps
                            .get_mut(&address)
                            .expect("csp exists")
                            .cosigned
                            .insert(completed.tx_id);
                        self.log(Event::Cosigned {
                            csp: address,
                            tx: completed.tx_id,
                        });
                        self.broadcast_tx(address, completed);
                    }
                    Err(e) => {
                        self.log(Event::CosignRefused {
                            csp: address,
                            tx: draft.tx_id,
                            reason: e.to_string(),
                        });
                    }
                }
            }

            let requests: Vec<Transaction> = {
                let csp = self.csps.get_mut(&address).expect("csp exists");
                csp.inbox_requests.drain(..).collect()
            };
            for request in requests {
                if self.csps[&address].handled_requests.contains(&request.tx_id) {
                    continue;
                }
                self.csps
                    .get_mut(&address)
                    .expect("csp exists")
                    .handled_requests
                    .insert(request.tx_id);
                let handled = {
                    let csp = &self.csps[&address];
                    let contracts = &self.miners[&address].contracts;
                    if verify_transaction(&request, contracts).is_err() {
                        None
                    } else {
                        csp_handle_access(&csp.store, contracts, &csp.keypair, &request, round).ok()
                    }
                };
                let Some((outcome, log_tx)) = handled else {
                    continue;
                };
                let TxPayload::AccessRequest(req_payload) = &request.payload else {
                    continue;
                };
                match &outcome {
                    AccessOutcome::Grant {
                        records,
                        result_hash,
                    } => {
                        self.grants += 1;
                        self.log(Event::Granted {
                            csp: address,
                            requester: request.initiator,
                            vehicle: req_payload.vehicle,
                            request_tx: request.tx_id,
                            record_count: records.len(),
                            result_hash: *result_hash,
                        });
                        let delivery = GrantDelivery {
                            request_tx: request.tx_id,
                            vehicle: req_payload.vehicle,
                            records: records.clone(),
                            result_hash: *result_hash,
                        };
                        self.send(
                            address,
                            request.initiator,
                            BACKBONE_HOPS,
                            MessagePayload::GrantMsg(delivery),
                        );
                    }
                    AccessOutcome::Denial { reason } => {
                        self.denials += 1;
                        self.log(Event::Denied {
                            csp: address,
                            requester: request.initiator,
                            vehicle: req_payload.vehicle,
                            request_tx: request.tx_id,
                            reason: format!("{reason:?}"),
                        });
                    }
                }
                self.broadcast_tx(address, log_tx);
            }
        }
    }

    /// Sub-step 5: each miner spends its hash budget on a template over its
    /// current tip and broadcasts any block it finds.
    fn step_miners_mine(&mut self) {
        let order: Vec<Address> = self.miners.keys().copied().collect();
        let budget = self.config.miner_hashes_per_round;
        let difficulty = self.config.difficulty;
        let max_txs = self.config.max_block_txs;
        let round = self.round;
        for address in order {
            let (txs, parent) = {
                let miner = &self.miners[&address];
                (miner.template_txs(max_txs), miner.chain.tip_header().cloned())
            };
            if txs.is_empty() {
                // Idle tick: no pending transactions to bundle.
                self.log(Event::MinerWorked {
                    miner: address,
                    attempts: 0,
                });
                continue;
            }
            let mined = try_mine(&txs, parent.as_ref(), difficulty, address, round, 0, budget)
                .expect("template transactions are non-empty");
            match mined {
                Some(block) => {
                    let attempts = block.header.nonce + 1;
                    self.total_hash_attempts += attempts;
                    self.log(Event::MinerWorked {
                        miner: address,
                        attempts,
                    });
                    self.log(Event::BlockFound {
                        miner: address,
                        index: block.header.index,
                        hash: block.header.hash(),
                        attempts,
                        tx_count: block.transactions.len(),
                    });
                    let chain_snapshot = {
                        let miner = self.miners.get_mut(&address).expect("miner exists");
                        miner.note_mined(&block);
                        miner
                            .contracts
                            .apply_block(&block)
                            .expect("own template replays cleanly");
                        miner.chain.push(block);
                        miner.chain.clone()
                    };
                    if let Some(tip) = chain_snapshot.tip_hash() {
                        let state = self.miners[&address].contracts.clone();
                        self.validated_tips.insert(tip, Some(state));
                    }
                    self.refresh_csp_confirmations(address);
                    self.broadcast_chain(address, chain_snapshot);
                }
                None => {
                    self.total_hash_attempts += budget;
                    self.log(Event::MinerWorked {
                        miner: address,
                        attempts: budget,
                    });
                }
            }
        }
    }

    /// Validates a received chain once per unique tip, caching the replayed
    /// contract state for adopters.
    fn validated_state_for(&mut self, chain: &Chain) -> Option<ContractsState> {
        let tip = chain.tip_hash()?;
        if let Some(cached) = self.validated_tips.get(&tip) {
            return cached.clone();
        }
        let result = validate_and_replay(chain).ok();
        self.validated_tips.insert(tip, result.clone());
        result
    }

    /// Sub-step 6: fork choice over every chain a miner knows about.
    fn step_miners_adopt(&mut self) {
        let order: Vec<Address> = self.miners.keys().copied().collect();
        for address in order {
            let candidates: Vec<Chain> = {
                let miner = self.miners.get_mut(&address).expect("miner exists");
                miner.inbox_chains.drain(..).collect()
            };
            if candidates.is_empty() {
                continue;
            }
            let mut best: Option<Chain> = None;
            for candidate in candidates {
                let improves = {
                    let current = best.as_ref().unwrap_or(&self.miners[&address].chain);
                    compare_chains(&candidate, current) == std::cmp::Ordering::Greater
                };
                if improves && self.validated_state_for(&candidate).is_some() {
                    best = Some(candidate);
                }
            }
            let Some(winner) = best else {
                continue;
            };
            let state = self
                .validated_state_for(&winner)
                .expect("winner was just validated");
            let (tip, length) = (winner.tip_hash().expect("non-empty chain"), winner.len());
            {
                let miner = self.miners.get_mut(&address).expect("miner exists");
                miner.adopt(winner.clone(), state);
            }
            self.log(Event::ChainAdopted {
                miner: address,
                tip,
                length,
            });
            self.refresh_csp_confirmations(address);
            self.broadcast_chain(address, winner);
        }
        self.refresh_canonical();
    }

    fn refresh_csp_confirmations(&mut self, address: Address) {
        let Some(csp) = self.csps.get_mut(&address) else {
            return;
        };
        let chain = &self.miners[&address].chain;
        csp.store.refresh_confirmations(chain);
    }

    /// Keeps the observer's canonical chain at the fork-choice winner over
    /// all miners, applying new blocks incrementally when the winner extends
    /// the previous canonical chain.
    fn refresh_canonical(&mut self) {
        let mut best: Option<&Chain> = None;
        for miner in self.miners.values() {
            let current = best.unwrap_or(&self.canonical_chain);
            if compare_chains(&miner.chain, current) == std::cmp::Ordering::Greater {
                best = Some(&miner.chain);
            }
        }
        let Some(winner) = best else {
            return;
        };
        let winner = winner.clone();
        let old_len = self.canonical_chain.len();
        let extends = old_len > 0
            && winner.len() >= old_len
            && winner.blocks[old_len - 1].header.hash()
                == self.canonical_chain.tip_hash().expect("non-empty canonical");
        if extends {
            for block in &winner.blocks[old_len..] {
                self.canonical_state
                    .apply_block(block)
                    .expect("validated chains replay cleanly");
            }
        } else {
            let mut state = ContractsState::new();
            for block in &winner.blocks {
                state.apply_block(block).expect("validated chains replay cleanly");
            }
            self.canonical_state = state;
        }
        self.canonical_chain = winner;
    }

    /// Sub-step 7: vehicles in RSU coverage purge uploads that are buried
    /// deep enough in the contacted fog node's chain.
    fn step_vehicles_purge(&mut self) {
        let order = self.vehicle_order.clone();
        let depth = self.config.confirmation_depth;
        for address in order {
            let position = self.vehicles[&address].position;
            let Some(rsu_index) = self.nearest_rsu_in_range(position) else {
                continue;
            };
            let fog_addr = self.fog_addresses[self.rsus[rsu_index].fog_index];
            let receipts = {
                let chain = &self.miners[&fog_addr].chain;
                let vehicle = self.vehicles.get_mut(&address).expect("vehicle exists");
                vehicle.state.purge_local(chain, depth)
            };
            for receipt in receipts {
                self.purged_records += receipt.records_purged as u64;
                self.vehicles
                    .get_mut(&address)
                    .expect("vehicle exists")
                    .last_resend
                    .remove(&receipt.tx_id);
                self.log(Event::Purged {
                    vehicle: address,
                    tx: receipt.tx_id,
                    record_count: receipt.records_purged,
                    depth: receipt.depth,
                });
            }
        }
    }

    /// Sub-step 8: providers analyze granted data; alerts ride back to the
    /// fog layer and are handed to vehicles at their next RSU contact.
    fn step_alerts(&mut self) {
        let order: Vec<Address> = self.provider_addresses.clone();
        let round = self.round;
        for address in order {
            let grants: Vec<GrantDelivery> = {
                let provider = self.providers.get_mut(&address).expect("provider exists");
                provider.inbox_grants.drain(..).collect()
            };
            for grant in grants {
                let alerts = analyze_and_alert(grant.vehicle, &grant.records);
                for alert in alerts {
                    self.alerts_raised += 1;
                    self.log(Event::AlertRaised {
                        vehicle: alert.vehicle,
                        rule_id: alert.rule_id.clone(),
                        severity: alert.severity,
                        parameter: alert.parameter,
                    });
                    if alert.severity == AlertSeverity::Critical {
                        // Critical findings are anchored in the vehicle's
                        // activity contract as a notification.
                        let payload = TxPayload::AccessLog(AccessLogPayload {
                            ac_owner: alert.vehicle,
                            action: AcAction::Notify,
                            counterparty: address,
                            data_hash: canonical_digest(&alert),
                            request_tx: grant.request_tx,
                        });
                        let mut tx = Transaction::build(payload, address, round);
                        tx.sign_with(&self.providers[&address].keypair);
                        self.log(Event::NotifyLogged {
                            provider: address,
                            vehicle: alert.vehicle,
                            tx: tx.tx_id,
                        });
                        self.broadcast_tx(address, tx);
                    }
                    let vehicle = alert.vehicle;
                    self.send(address, vehicle, BACKBONE_HOPS, MessagePayload::AlertMsg(alert));
                }
            }
        }

        // Vehicles in coverage pick up alerts that have reached the fog.
        let order = self.vehicle_order.clone();
        for address in order {
            let position = self.vehicles[&address].position;
            if self.nearest_rsu_in_range(position).is_none() {
                continue;
            }
            let Some(parked) = self.pending_alerts.get_mut(&address) else {
                continue;
            };
            let mut delivered = Vec::new();
            parked.retain(|(available_at, alert)| {
                if *available_at <= round {
                    delivered.push(alert.clone());
                    false
                } else {
                    true
                }
            });
            if parked.is_empty() {
                self.pending_alerts.remove(&address);
            }
            for alert in delivered {
                self.alerts_delivered += 1;
                self.vehicles
                    .get_mut(&address)
                    .expect("vehicle exists")
                    .alerts_received += 1;
                self.log(Event::AlertDelivered {
                    vehicle: address,
                    rule_id: alert.rule_id,
                });
            }
        }
    }

    /// A compact digest of the world's observable state, for determinism
    /// checks.
    pub fn state_digest(&self) -> Digest {
        #[derive(serde::Serialize)]
        struct WorldSnapshot {
            round: u64,
            miner_tips: Vec<(Address, Option<Digest>, usize)>,
            vehicle_state: Vec<(Address, u64, usize, usize, u64)>,
            csp_blocks: Vec<(Address, usize, usize)>,
            canonical_tip: Option<Digest>,
            events: u64,
            records_logged: u64,
        }
        let snapshot = WorldSnapshot {
            round: self.round,
            miner_tips: self
                .miners
                .iter()
                .map(|(a, m)| (*a, m.chain.tip_hash(), m.chain.len()))
                .collect(),
            vehicle_state: self
                .vehicles
                .iter()
                .map(|(a, v)| {
                    (
                        *a,
                        v.position.to_bits(),
                        v.state.local_log.len(),
                        v.state.pending_uploads.len(),
                        v.alerts_received,
                    )
                })
                .collect(),
            csp_blocks: self
                .csps
                .iter()
                .map(|(a, c)| (*a, c.store.blocks.len(), c.store.confirmed.len()))
                .collect(),
            canonical_tip: self.canonical_chain.tip_hash(),
            events: self.next_event_seq,
            records_logged: self.records_logged,
        };
        canonical_digest(&snapshot)
    }
}
