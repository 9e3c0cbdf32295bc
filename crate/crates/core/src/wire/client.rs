use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde_json::Value;

use super::message::{LikelihoodQuery, Request, PROTOCOL_VERSION};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::grid::{Grid3, Shape3};
use crate::lidar::{scan_to_image, Scan};
use crate::likelihood::{BlockProvider, BlockQuery, Level, LikelihoodGrid, LikelihoodProvider};
use crate::mapgen::GridMap;
use crate::num::Scalar;
use crate::policy::{ActionDist, PolicyInput, PolicyProvider};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Synchronous request/reply over any byte stream.
pub struct Connection {
    reader: BufReader<Box<dyn Read + Send>>,
    writer: Box<dyn Write + Send>,
}

impl Connection {
    pub fn new(reader: Box<dyn Read + Send>, writer: Box<dyn Write + Send>) -> Self {
        Self { reader: BufReader::new(reader), writer }
    }

    pub fn tcp(addr: impl ToSocketAddrs, timeout: Duration) -> Result<Self> {
        let addr = addr.to_socket_addrs()?.next().ok_or_else(|| Error::Config("address resolves to nothing".into()))?;
        let stream = TcpStream::connect_timeout(&addr, timeout)?;
        stream.set_read_timeout(Some(timeout))?;
        stream.set_write_timeout(Some(timeout))?;
        stream.set_nodelay(true)?;
        Ok(Self::new(Box::new(stream.try_clone()?), Box::new(stream)))
    }

    /// Sends one request and returns the reply object. `{"ok": false}`
    /// replies become [`Error::Protocol`].
    pub fn call(&mut self, req: &Request) -> Result<Value> {
        serde_json::to_writer(&mut self.writer, req)?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(Error::Protocol("connection closed before a reply".into()));
        }
        let reply: Value = serde_json::from_str(&line)?;
        match reply.get("ok").and_then(Value::as_bool) {
            Some(true) => Ok(reply),
            Some(false) => Err(Error::Protocol(
                reply.get("error").and_then(Value::as_str).unwrap_or("unspecified error").to_string(),
            )),
            None => Err(Error::Protocol("reply lacks an ok field".into())),
        }
    }

    /// Handshake; returns the server's reply.
    pub fn hello(&mut self) -> Result<Value> {
        self.call(&Request::Hello { version: PROTOCOL_VERSION })
    }
}

pub fn field<V: DeserializeOwned>(reply: &Value, key: &str) -> Result<V> {
    let v = reply.get(key).ok_or_else(|| Error::Protocol(format!("reply lacks {key:?}")))?;
    Ok(serde_json::from_value(v.clone())?)
}

/// A policy answered by a remote model through `policy_query`.
pub struct RemotePolicy {
    conn: Mutex<Connection>,
    name: String,
}

impl RemotePolicy {
    pub fn new(conn: Connection, name: impl Into<String>) -> Self {
        Self { conn: Mutex::new(conn), name: name.into() }
    }
}

impl<T: Scalar> PolicyProvider<T> for RemotePolicy {
    fn action_dist(&self, input: &PolicyInput<'_, T>) -> Result<ActionDist> {
        let s = input.belief.shape();
        let req = Request::PolicyQuery {
            belief: Tensor::from_scalars(&s.as_array(), input.belief.as_slice())?,
            map: Tensor::from_f32(&[s.rows, s.cols], input.map_low)?,
            scan: Tensor::from_f32(&[s.rows, s.cols], input.scan_low)?,
            map_id: None,
        };
        let reply = self.conn.lock().map_err(|_| Error::Protocol("connection poisoned".into()))?.call(&req)?;
        ActionDist::normalized(field(&reply, "probs")?)
    }

    fn name(&self) -> &str {
        &self.name
    }
}

fn decode_distribution<T: Scalar>(t: &Tensor, shape: &[usize]) -> Result<Vec<T>> {
    let mut values: Vec<T> = t.expect_shape(shape)?.to_scalars()?;
    if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
        return Err(Error::Input("remote likelihood has negative or non-finite entries".into()));
    }
    let total: T = values.iter().copied().sum();
    if total <= T::zero() {
        return Err(Error::Input("remote likelihood has no mass".into()));
    }
    values.iter_mut().for_each(|v| *v /= total);
    Ok(values)
}

/// Coarse likelihood from a remote model through `likelihood_query`.
pub struct RemoteLikelihood {
    conn: Mutex<Connection>,
    map: Arc<GridMap>,
    raster: Tensor,
    map_id: Option<String>,
}

impl RemoteLikelihood {
    pub fn new(conn: Connection, map: Arc<GridMap>) -> Result<Self> {
        let raster = Tensor::from_u8(&[map.height(), map.width()], map.occupancy())?;
        Ok(Self { conn: Mutex::new(conn), map, raster, map_id: None })
    }

    /// Names the map on servers that hold several.
    pub fn with_map_id(mut self, id: impl Into<String>) -> Self {
        self.map_id = Some(id.into());
        self
    }
}

impl<T: Scalar> LikelihoodProvider<T> for RemoteLikelihood {
    fn likelihood(&self, scan: &Scan<T>) -> Result<LikelihoodGrid<T>> {
        let g = self.map.geometry();
        let img = scan_to_image(scan, g);
        let req = Request::LikelihoodQuery(LikelihoodQuery {
            level: Level::Coarse,
            scan: Tensor::from_scalars(&[scan.beams()], &scan.ranges)?,
            lidar: scan.config,
            map: self.raster.clone(),
            scan_image: Tensor::from_u8(&[img.height, img.width], &img.raster)?,
            cell: None,
            k: None,
            map_id: self.map_id.clone(),
        });
        let reply = self.conn.lock().map_err(|_| Error::Protocol("connection poisoned".into()))?.call(&req)?;
        let shape = g.shape();
        let values = decode_distribution(&field::<Tensor>(&reply, "likelihood")?, &shape.as_array())?;
        let beta = reply.get("beta").and_then(Value::as_f64).unwrap_or(1.0);
        Ok(LikelihoodGrid { values: Grid3::from_vec(shape, values)?, level: Level::Coarse, beta })
    }

    fn shape(&self) -> Shape3 {
        self.map.geometry().shape()
    }
}

/// Fine `k × k` blocks from a remote model.
pub struct RemoteBlockProvider {
    conn: Mutex<Connection>,
    map_id: Option<String>,
}

impl RemoteBlockProvider {
    pub fn new(conn: Connection) -> Self {
        Self { conn: Mutex::new(conn), map_id: None }
    }

    pub fn with_map_id(mut self, id: impl Into<String>) -> Self {
        self.map_id = Some(id.into());
        self
    }
}

impl<T: Scalar> BlockProvider<T> for RemoteBlockProvider {
    fn block(&self, q: &BlockQuery<'_, T>) -> Result<Vec<T>> {
        let side = [q.crop_px, q.crop_px];
        let req = Request::LikelihoodQuery(LikelihoodQuery {
            level: Level::Fine,
            scan: Tensor::from_scalars(&[q.scan.beams()], &q.scan.ranges)?,
            lidar: q.scan.config,
            map: Tensor::from_u8(&side, q.map_crop)?,
            scan_image: Tensor::from_u8(&side, q.scan_crop)?,
            cell: Some(q.cell),
            k: Some(q.k),
            map_id: self.map_id.clone(),
        });
        let reply = self.conn.lock().map_err(|_| Error::Protocol("connection poisoned".into()))?.call(&req)?;
        decode_distribution(&field::<Tensor>(&reply, "likelihood")?, &[q.k, q.k])
    }
}
