use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, ChatRequest, GatewayError};

/// SHA-256 over the system and user messages, separated by a NUL byte.
pub fn request_hash(system: &str, user: &str) -> String {
    let mut h = Sha256::new();
    h.update(system.as_bytes());
    h.update([0u8]);
    h.update(user.as_bytes());
    hex::encode(h.finalize())
}

/// One recorded exchange. Entries with a pattern match any request whose
/// messages satisfy the regexes instead of matching by hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    #[serde(default)]
    pub request_hash: String,
    #[serde(default)]
    pub system: String,
    #[serde(default)]
    pub user: String,
    pub response_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_pattern: Option<String>,
}

impl CassetteEntry {
    pub fn exact(system: &str, user: &str, response: &str) -> Self {
        Self {
            request_hash: request_hash(system, user),
            system: system.to_string(),
            user: user.to_string(),
            response_text: response.to_string(),
            system_pattern: None,
            user_pattern: None,
        }
    }

    pub fn pattern(system_pattern: Option<&str>, user_pattern: &str, response: &str) -> Self {
        Self {
            request_hash: String::new(),
            system: String::new(),
            user: String::new(),
            response_text: response.to_string(),
            system_pattern: system_pattern.map(str::to_string),
            user_pattern: Some(user_pattern.to_string()),
        }
    }

    fn is_pattern(&self) -> bool {
        self.system_pattern.is_some() || self.user_pattern.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CassetteMode {
    /// Serve only recorded entries; anything else is an error.
    Replay,
    /// Serve recorded entries, forward misses to the inner backend and record them.
    Record,
    /// Forward everything to the inner backend without recording.
    Passthrough,
}

impl std::str::FromStr for CassetteMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "replay" => Ok(Self::Replay),
            "record" => Ok(Self::Record),
            "passthrough" => Ok(Self::Passthrough),
            other => Err(format!("unknown cassette mode {other:?}")),
        }
    }
}

struct CompiledPattern {
    entry: usize,
    system: Option<Regex>,
    user: Option<Regex>,
}

struct State {
    entries: Vec<CassetteEntry>,
    patterns: Vec<CompiledPattern>,
}

pub struct Cassette {
    mode: CassetteMode,
    state: Mutex<State>,
    inner: Option<Box<dyn Backend>>,
    path: Option<PathBuf>,
    id: String,
}

impl std::fmt::Debug for Cassette {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cassette")
            .field("mode", &self.mode)
            .field("entries", &self.len())
            .field("path", &self.path)
            .finish()
    }
}

fn compile(entries: &[CassetteEntry]) -> Result<Vec<CompiledPattern>, GatewayError> {
    let re = |p: &Option<String>| -> Result<Option<Regex>, GatewayError> {
        p.as_deref()
            .map(|p| Regex::new(p).map_err(|e| GatewayError::Cassette(format!("bad pattern {p:?}: {e}"))))
            .transpose()
    };
    entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.is_pattern())
        .map(|(i, e)| {
            Ok(CompiledPattern {
                entry: i,
                system: re(&e.system_pattern)?,
                user: re(&e.user_pattern)?,
            })
        })
        .collect()
}

impl Cassette {
    pub fn replay(entries: Vec<CassetteEntry>) -> Result<Self, GatewayError> {
        Self::build(CassetteMode::Replay, entries, None, None)
    }

    pub fn with_inner(
        mode: CassetteMode,
        entries: Vec<CassetteEntry>,
        inner: Box<dyn Backend>,
    ) -> Result<Self, GatewayError> {
        Self::build(mode, entries, Some(inner), None)
    }

    /// Opens a cassette file. A missing file is an empty cassette unless
    /// replaying.
    pub fn open(path: &Path, mode: CassetteMode, inner: Option<Box<dyn Backend>>) -> Result<Self, GatewayError> {
        let entries = if path.exists() {
            read_entries(path)?
        } else if mode == CassetteMode::Replay {
            return Err(GatewayError::Cassette(format!("cassette {} not found", path.display())));
        } else {
            Vec::new()
        };
        Self::build(mode, entries, inner, Some(path.to_path_buf()))
    }

    fn build(
        mode: CassetteMode,
        entries: Vec<CassetteEntry>,
        inner: Option<Box<dyn Backend>>,
        path: Option<PathBuf>,
    ) -> Result<Self, GatewayError> {
        if mode != CassetteMode::Replay && inner.is_none() {
            return Err(GatewayError::Cassette(format!("{mode:?} mode needs an inner backend")));
        }
        let id = match &inner {
            Some(b) => format!("cassette[{mode:?}]:{}", b.id()),
            None => "cassette[Replay]".to_string(),
        };
        let patterns = compile(&entries)?;
        Ok(Self {
            mode,
            state: Mutex::new(State { entries, patterns }),
            inner,
            path,
            id,
        })
    }

    pub fn mode(&self) -> CassetteMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("cassette poisoned").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> Vec<CassetteEntry> {
        self.state.lock().expect("cassette poisoned").entries.clone()
    }

    fn lookup(&self, state: &State, request: &ChatRequest) -> Result<String, GatewayError> {
        let hash = request.hash();
        let exact: Vec<&CassetteEntry> = state
            .entries
            .iter()
            .filter(|e| !e.is_pattern() && e.request_hash == hash)
            .collect();
        match exact.len() {
            1 => return Ok(exact[0].response_text.clone()),
            0 => {}
            count => return Err(GatewayError::CassetteAmbiguous { hash, count }),
        }
        let hits: Vec<usize> = state
            .patterns
            .iter()
            .filter(|p| {
                p.system.as_ref().is_none_or(|r| r.is_match(&request.system_message))
                    && p.user.as_ref().is_none_or(|r| r.is_match(&request.user_message))
            })
            .map(|p| p.entry)
            .collect();
        match hits.len() {
            1 => Ok(state.entries[hits[0]].response_text.clone()),
            0 => Err(GatewayError::CassetteMiss { hash }),
            count => Err(GatewayError::CassetteAmbiguous { hash, count }),
        }
    }

    /// Writes entries back to the file the cassette was opened from.
    pub fn save(&self) -> Result<(), GatewayError> {
        let path = self
            .path
            .as_ref()
            .ok_or_else(|| GatewayError::Cassette("cassette has no backing file".into()))?;
        write_entries(path, &self.entries())
    }

    /// Hex SHA-256 of the serialized entries, for run manifests.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for e in self.entries() {
            h.update(serde_json::to_string(&e).expect("entry serializes").as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

impl Backend for Cassette {
    fn id(&self) -> &str {
        &self.id
    }

    fn send(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        match self.mode {
            CassetteMode::Replay => {
                let state = self.state.lock().expect("cassette poisoned");
                self.lookup(&state, request)
            }
            CassetteMode::Passthrough => self.inner.as_ref().expect("checked at build").send(request),
            CassetteMode::Record => {
                {
                    let state = self.state.lock().expect("cassette poisoned");
                    if let Ok(text) = self.lookup(&state, request) {
                        return Ok(text);
                    }
                }
                let text = self.inner.as_ref().expect("checked at build").send(request)?;
                let mut state = self.state.lock().expect("cassette poisoned");
                if matches!(self.lookup(&state, request), Err(GatewayError::CassetteMiss { .. })) {
                    state.entries.push(CassetteEntry::exact(
                        &request.system_message,
                        &request.user_message,
                        &text,
                    ));
                }
                Ok(text)
            }
        }
    }
}

pub fn read_entries(path: &Path) -> Result<Vec<CassetteEntry>, GatewayError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GatewayError::Cassette(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                GatewayError::Cassette(format!("{} line {}: {e}", path.display(), i + 1))
            })
        })
        .collect()
}

pub fn write_entries(path: &Path, entries: &[CassetteEntry]) -> Result<(), GatewayError> {
    let err = |e: std::io::Error| GatewayError::Cassette(format!("{}: {e}", path.display()));
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(err)?);
    for e in entries {
        writeln!(f, "{}", serde_json::to_string(e).expect("entry serializes")).map_err(err)?;
    }
    f.flush().map_err(err)
}
