//! In-memory sessions, one lock each, with optional JSON-lines persistence.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use lpwp_core::lexicon::Lexicon;
use lpwp_core::session::{Action, Session};
use lpwp_core::suggest::RuleGenerator;
use tokio::sync::Mutex;

use crate::error::ApiError;

pub type SessionHandle = Arc<Mutex<Session>>;

pub struct Store {
    sessions: RwLock<HashMap<String, SessionHandle>>,
    pub generator: RuleGenerator,
    dir: Option<PathBuf>,
}

impl Store {
    /// Opens the store, replaying every `*.jsonl` log found in `dir`.
    pub fn open(lexicon: Arc<Lexicon>, dir: Option<PathBuf>) -> io::Result<Store> {
        let generator = RuleGenerator::new(lexicon);
        let mut sessions = HashMap::new();
        if let Some(d) = &dir {
            fs::create_dir_all(d)?;
            for entry in fs::read_dir(d)? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "jsonl") {
                    let s = load(&path, &generator)?;
                    sessions.insert(s.id.clone(), Arc::new(Mutex::new(s)));
                }
            }
        }
        Ok(Store {
            sessions: RwLock::new(sessions),
            generator,
            dir,
        })
    }

    pub fn get(&self, id: &str) -> Result<SessionHandle, ApiError> {
        self.sessions
            .read()
            .expect("store lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(id))
    }

    pub fn insert(&self, session: Session) -> Result<(), ApiError> {
        if let Some(path) = self.path(&session.id) {
            let mut f = File::create(path).map_err(|e| ApiError::internal(e.to_string()))?;
            for a in &session.log {
                write_line(&mut f, a)?;
            }
        }
        self.sessions
            .write()
            .expect("store lock")
            .insert(session.id.clone(), Arc::new(Mutex::new(session)));
        Ok(())
    }

    /// Appends the session's log entries past `from` to its file.
    pub fn persist(&self, session: &Session, from: usize) -> Result<(), ApiError> {
        let Some(path) = self.path(&session.id) else {
            return Ok(());
        };
        if session.log.len() <= from {
            return Ok(());
        }
        let mut f = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| ApiError::internal(e.to_string()))?;
        for a in &session.log[from..] {
            write_line(&mut f, a)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn path(&self, id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }
}

fn write_line(f: &mut File, a: &Action) -> Result<(), ApiError> {
    let line = serde_json::to_string(a).map_err(|e| ApiError::internal(e.to_string()))?;
    writeln!(f, "{line}").map_err(|e| ApiError::internal(e.to_string()))
}

fn load(path: &Path, generator: &RuleGenerator) -> io::Result<Session> {
    let invalid = |m: String| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {m}", path.display()));
    let mut log = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        log.push(serde_json::from_str::<Action>(&line).map_err(|e| invalid(e.to_string()))?);
    }
    Session::replay(&log, generator, generator.lexicon()).map_err(|e| invalid(e.to_string()))
}
