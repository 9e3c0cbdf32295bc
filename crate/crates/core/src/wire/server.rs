use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, ToSocketAddrs};

use serde_json::{json, Value};

use super::message::{
    belief_checksum, error_reply, info_json, observation_json, ok, LikelihoodQuery, Request, PROTOCOL_VERSION,
};
use super::tensor::Tensor;
use crate::env::{Environment, EpisodeConfig};
use crate::error::{Error, Result};
use crate::filter::{Action, BeliefGrid};
use crate::grid::Grid3;
use crate::lidar::Scan;
use crate::likelihood::{fine_block, Level};
use crate::mapgen::{GridGeometry, GridMap};
use crate::num::Scalar;
use crate::policy::{PolicyInput, PolicyKind, PolicyProvider};

/// A map the server can run episodes on. `seed` seeds the filter map's
/// perturbation, as in [`Environment::new`].
#[derive(Debug, Clone)]
pub struct ServedMap {
    pub id: String,
    pub map: GridMap,
    pub seed: u64,
}

/// What a request did to the connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Close,
}

struct Slot<T: Scalar> {
    env: Environment<T>,
    policy: Option<Box<dyn PolicyProvider<T>>>,
}

/// Serves episodes over newline-delimited JSON. Every request line gets
/// exactly one reply line. One client at a time; the episode survives a
/// dropped connection.
pub struct Server<T: Scalar> {
    maps: Vec<ServedMap>,
    config: EpisodeConfig,
    policy: Option<PolicyKind>,
    slots: HashMap<usize, Slot<T>>,
    current: Option<usize>,
    geometry: GridGeometry,
}

impl<T: Scalar> Server<T> {
    /// All maps must share one grid geometry.
    pub fn new(maps: Vec<ServedMap>, config: EpisodeConfig) -> Result<Self> {
        config.validate()?;
        let first = maps.first().ok_or_else(|| Error::Config("the server needs at least one map".into()))?;
        let geometry = *first.map.geometry();
        if let Some(m) = maps.iter().find(|m| m.map.geometry().shape() != geometry.shape()) {
            return Err(Error::Config(format!("map {} has a different grid than map {}", m.id, first.id)));
        }
        Ok(Self { maps, config, policy: None, slots: HashMap::new(), current: None, geometry })
    }

    /// Answers `policy_query` with a built-in policy.
    pub fn with_policy(mut self, kind: PolicyKind) -> Self {
        self.policy = Some(kind);
        self
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    fn map_index(&self, map_id: Option<&str>, seed: u64) -> Result<usize> {
        match map_id {
            Some(id) => {
                self.maps.iter().position(|m| m.id == id).ok_or_else(|| Error::Input(format!("unknown map id {id:?}")))
            }
            None => Ok((seed % self.maps.len() as u64) as usize),
        }
    }

    fn slot(&mut self, idx: usize) -> Result<&mut Slot<T>> {
        if !self.slots.contains_key(&idx) {
            let m = &self.maps[idx];
            let env = Environment::new(m.map.clone(), self.config, m.seed)?;
            let policy = match self.policy {
                Some(kind) => Some(kind.build(env.matrix(), self.config.beta, self.config.noise.motion)?),
                None => None,
            };
            self.slots.insert(idx, Slot { env, policy });
        }
        Ok(self.slots.get_mut(&idx).expect("inserted above"))
    }

    /// Slot named by `map_id`, else the current episode's, else the first map's.
    fn query_slot(&mut self, map_id: Option<&str>) -> Result<&mut Slot<T>> {
        let idx = match map_id {
            Some(_) => self.map_index(map_id, 0)?,
            None => self.current.unwrap_or(0),
        };
        self.slot(idx)
    }

    /// Handles one request line and returns the reply.
    pub fn handle_line(&mut self, line: &str) -> (Value, Flow) {
        let req: Request = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => return (error_reply(format!("malformed request: {e}")), Flow::Continue),
        };
        let flow = if req == Request::Close { Flow::Close } else { Flow::Continue };
        match self.handle(req) {
            Ok(v) => (v, flow),
            Err(e) => (error_reply(e), flow),
        }
    }

    pub fn handle(&mut self, req: Request) -> Result<Value> {
        match req {
            Request::Hello { version } => {
                if version != PROTOCOL_VERSION {
                    return Err(Error::Protocol(format!(
                        "protocol version mismatch: client {version}, server {PROTOCOL_VERSION}"
                    )));
                }
                let g = self.geometry;
                Ok(ok(json!({
                    "version": PROTOCOL_VERSION,
                    "geometry": { "headings": g.headings, "rows": g.rows, "cols": g.cols },
                    "maps": self.maps.iter().map(|m| m.id.as_str()).collect::<Vec<_>>(),
                    "horizon": self.config.horizon,
                    "reward": self.config.reward.as_str(),
                    "actions": ["left", "right", "forward"],
                })))
            }
            Request::Reset { seed, map_id } => {
                let idx = self.map_index(map_id.as_deref(), seed)?;
                let id = self.maps[idx].id.clone();
                let env = &mut self.slot(idx)?.env;
                let obs = env.reset(seed)?;
                let state = env.state().expect("reset started an episode");
                let reply = ok(json!({
                    "map_id": id,
                    "observation": observation_json(&obs)?,
                    "info": {
                        "step": 0,
                        "metrics": state.metrics,
                        "pose": state.pose,
                        "belief_checksum": belief_checksum(obs.belief.as_slice()),
                    },
                }));
                self.current = Some(idx);
                Ok(reply)
            }
            Request::Step { action } => {
                let action = usize::try_from(action)
                    .map_err(|_| Error::param(format!("action {action} is not 0, 1 or 2")))
                    .and_then(Action::from_index)?;
                let idx = self.current.ok_or(Error::NoEpisode)?;
                let out = self.slot(idx)?.env.step(action)?;
                Ok(ok(json!({
                    "observation": observation_json(&out.observation)?,
                    "reward": out.reward,
                    "done": out.done,
                    "info": info_json(&out.info, &out.observation),
                })))
            }
            Request::Close => Ok(ok(json!({}))),
            Request::PolicyQuery { belief, map, scan, map_id } => {
                let slot = self.query_slot(map_id.as_deref())?;
                let policy = slot.policy.as_ref().ok_or_else(|| Error::Config("this server has no policy".into()))?;
                let s = slot.env.filter_map().geometry().shape();
                let belief = decode_belief::<T>(&belief, s)?;
                let map_low = map.expect_shape(&[s.rows, s.cols])?.to_f32()?;
                let scan_low = scan.expect_shape(&[s.rows, s.cols])?.to_f32()?;
                let input =
                    PolicyInput { belief: &belief, map: slot.env.filter_map(), map_low: &map_low, scan_low: &scan_low };
                let dist = policy.action_dist(&input)?;
                Ok(ok(json!({ "probs": dist.0 })))
            }
            Request::LikelihoodQuery(q) => self.likelihood(q),
        }
    }

    /// Reference answers from the scan-matching models of the named map.
    fn likelihood(&mut self, q: LikelihoodQuery) -> Result<Value> {
        let slot = self.query_slot(q.map_id.as_deref())?;
        let ranges: Vec<T> = q.scan.to_scalars()?;
        if q.scan.shape != [q.lidar.beams] {
            return Err(Error::Protocol(format!(
                "scan shape {:?} does not match {} beams",
                q.scan.shape, q.lidar.beams
            )));
        }
        let scan = Scan::new(ranges, q.lidar)?;
        match q.level {
            Level::Coarse => {
                let lik = slot.env.likelihood_provider().likelihood(&scan)?;
                Ok(ok(json!({
                    "likelihood": Tensor::from_scalars(&lik.shape().as_array(), lik.values.as_slice())?,
                    "beta": lik.beta,
                })))
            }
            Level::Fine => {
                let cell = q.cell.ok_or_else(|| Error::Protocol("fine query without a cell".into()))?;
                let mut h = slot.env.config().hierarchy;
                h.k = q.k.unwrap_or(h.k);
                let s = slot.env.filter_map().geometry().shape();
                if cell.heading >= s.headings || cell.row >= s.rows || cell.col >= s.cols {
                    return Err(Error::Input(format!("cell {cell:?} outside the grid")));
                }
                let block = fine_block(slot.env.filter_map(), &scan, cell, &h, slot.env.fine_provider().as_ref())?;
                Ok(ok(json!({ "likelihood": Tensor::from_scalars(&[h.k, h.k], &block)? })))
            }
        }
    }

    /// Serves one connection until `close` or end of input.
    pub fn serve_stream<R: BufRead, W: Write>(&mut self, reader: R, writer: W) -> Result<()> {
        let mut writer = BufWriter::new(writer);
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (reply, flow) = self.handle_line(&line);
            serde_json::to_writer(&mut writer, &reply)?;
            writer.write_all(b"\n")?;
            writer.flush()?;
            if flow == Flow::Close {
                break;
            }
        }
        Ok(())
    }

    /// Accepts connections one after another; stops after `limit` of them
    /// when given.
    pub fn serve_listener(&mut self, listener: &TcpListener, limit: Option<usize>) -> Result<()> {
        for (i, stream) in listener.incoming().enumerate() {
            let stream = stream?;
            let reader = BufReader::new(stream.try_clone()?);
            if let Err(e) = self.serve_stream(reader, stream) {
                log::warn!("connection ended with an error: {e}");
            }
            if limit.is_some_and(|l| i + 1 >= l) {
                break;
            }
        }
        Ok(())
    }

    pub fn serve_tcp(&mut self, addr: impl ToSocketAddrs) -> Result<()> {
        let listener = TcpListener::bind(addr)?;
        log::info!("listening on {}", listener.local_addr()?);
        self.serve_listener(&listener, None)
    }

    pub fn serve_stdio(&mut self) -> Result<()> {
        let stdin = std::io::stdin();
        self.serve_stream(stdin.lock(), std::io::stdout().lock())
    }
}

/// Belief from a wire tensor: must match `shape`, be finite and nonnegative
/// with positive mass; renormalized.
pub fn decode_belief<T: Scalar>(t: &Tensor, shape: crate::grid::Shape3) -> Result<BeliefGrid<T>> {
    let values: Vec<T> = t.expect_shape(&shape.as_array())?.to_scalars()?;
    if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
        return Err(Error::Input("belief has negative or non-finite entries".into()));
    }
    let mut grid = Grid3::from_vec(shape, values)?;
    if grid.normalize() <= T::zero() {
        return Err(Error::Input("belief has no mass".into()));
    }
    Ok(BeliefGrid::new(grid))
}

impl<T: Scalar> std::fmt::Debug for Server<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Server")
            .field("maps", &self.maps.iter().map(|m| &m.id).collect::<Vec<_>>())
            .field("current", &self.current)
            .finish()
    }
}
