//! Newline-delimited JSON protocol for external agents and models.
//!
//! Each request is one JSON object on one line with a `cmd` field; each
//! reply is one line with `"ok": true` plus the payload, or
//! `{"ok": false, "error": "..."}`.
//!
//! ```text
//! {"cmd":"hello","version":1}             -> geometry, map ids, horizon, reward
//! {"cmd":"reset","seed":7,"map_id":"00000"} -> observation, info
//! {"cmd":"step","action":2}               -> observation, reward, done, info
//! {"cmd":"close"}                         -> {} and the connection ends
//! {"cmd":"policy_query",...}              -> probs [Left, Right, Forward]
//! {"cmd":"likelihood_query",...}          -> likelihood tensor
//! ```
//!
//! Observations carry `belief` (`Θ × N × M`), `map` and `scan` (`N × M`) as
//! [`Tensor`]s. Actions are `0 = Left`, `1 = Right`, `2 = Forward`.

mod client;
mod message;
mod server;
mod tensor;

pub use client::{field, Connection, RemoteBlockProvider, RemoteLikelihood, RemotePolicy, DEFAULT_TIMEOUT};
pub use message::{belief_checksum, error_reply, LikelihoodQuery, Request, PROTOCOL_VERSION};
pub use server::{decode_belief, Flow, ServedMap, Server};
pub use tensor::Tensor;
