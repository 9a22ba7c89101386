//! Line-delimited JSON trace files.
//!
//! Line 1 is a header `{"format":"tracefold-trace","version":1,"mask":[...]}`;
//! every following line is one event record. Optional attributes appear in a
//! record exactly when the header mask enables them.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{AttributeMask, TraceError, TraceSource};
use crate::event::{Determinism, Event, GoalPathStep, LiveVar, Port, ProcId, ProcType, Term};

pub const FORMAT_NAME: &str = "tracefold-trace";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub mask: Vec<String>,
}

#[derive(Serialize)]
struct ProcOut<'a> {
    #[serde(rename = "type")]
    proc_type: &'a str,
    def_module: &'a str,
    decl_module: &'a str,
    name: &'a str,
    arity: u32,
    mode: u32,
}

#[derive(Serialize)]
struct LiveVarOut<'a> {
    name: &'a str,
    value: String,
    #[serde(rename = "type")]
    type_name: &'a str,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    chrono: u64,
    call: u64,
    depth: u32,
    port: &'a str,
    det: &'a str,
    proc: ProcOut<'a>,
    goal_path: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    args: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    arg_types: Option<&'a [String]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    local_vars: Option<Vec<LiveVarOut<'a>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    line: Option<Option<u32>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProcIn {
    #[serde(rename = "type")]
    proc_type: String,
    def_module: String,
    decl_module: String,
    name: String,
    arity: u32,
    mode: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LiveVarIn {
    name: String,
    value: String,
    #[serde(rename = "type")]
    type_name: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordIn {
    chrono: u64,
    call: u64,
    depth: u32,
    port: String,
    det: String,
    proc: ProcIn,
    goal_path: Vec<String>,
    #[serde(default)]
    args: Option<Vec<String>>,
    #[serde(default)]
    arg_types: Option<Vec<String>>,
    #[serde(default)]
    local_vars: Option<Vec<LiveVarIn>>,
    #[serde(default)]
    line: Option<u32>,
}

/// Streaming trace file writer.
pub struct TraceWriter {
    path: PathBuf,
    out: BufWriter<File>,
    mask: AttributeMask,
    written: u64,
    last_chrono: u64,
}

impl TraceWriter {
    pub fn create(path: impl AsRef<Path>, mask: AttributeMask) -> Result<Self, TraceError> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|source| TraceError::Io {
            path: path.clone(),
            source,
        })?;
        let mut w = TraceWriter {
            path,
            out: BufWriter::new(file),
            mask,
            written: 0,
            last_chrono: 0,
        };
        let header = TraceHeader {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            mask: mask.names().into_iter().map(String::from).collect(),
        };
        let line = serde_json::to_string(&header).expect("header serialises");
        w.write_line(&line)?;
        Ok(w)
    }

    fn write_line(&mut self, line: &str) -> Result<(), TraceError> {
        self.out
            .write_all(line.as_bytes())
            .and_then(|()| self.out.write_all(b"\n"))
            .map_err(|source| TraceError::Io {
                path: self.path.clone(),
                source,
            })
    }

    pub fn write_event(&mut self, e: &Event) -> Result<(), TraceError> {
        if e.chrono <= self.last_chrono {
            return Err(TraceError::Integrity {
                chrono: e.chrono,
                message: format!(
                    "chrono {} does not follow {} (events must be strictly increasing)",
                    e.chrono, self.last_chrono
                ),
            });
        }
        let missing = |what: &str| TraceError::Integrity {
            chrono: e.chrono,
            message: format!("event lacks `{what}`, which the trace mask enables"),
        };
        let m = self.mask;
        let args = if m.args {
            let a = e.args.as_ref().ok_or_else(|| missing("args"))?;
            Some(a.iter().map(Term::to_string).collect())
        } else {
            None
        };
        let arg_types = if m.arg_types {
            Some(e.arg_types.as_deref().ok_or_else(|| missing("arg_types"))?)
        } else {
            None
        };
        let local_vars = if m.local_vars {
            let vars = e.local_vars.as_ref().ok_or_else(|| missing("local_vars"))?;
            Some(
                vars.iter()
                    .map(|v| LiveVarOut {
                        name: &v.name,
                        value: v.value.to_string(),
                        type_name: &v.type_name,
                    })
                    .collect(),
            )
        } else {
            None
        };
        let line = if m.line_number {
            Some(e.line_number.ok_or_else(|| missing("line_number"))?)
        } else {
            None
        };
        let p = &e.proc;
        let rec = RecordOut {
            chrono: e.chrono,
            call: e.call,
            depth: e.depth,
            port: e.port.as_str(),
            det: e.det.as_str(),
            proc: ProcOut {
                proc_type: p.proc_type.as_str(),
                def_module: &p.def_module,
                decl_module: &p.decl_module,
                name: &p.name,
                arity: p.arity,
                mode: p.mode_number,
            },
            goal_path: e.goal_path.iter().map(ToString::to_string).collect(),
            args,
            arg_types,
            local_vars,
            line,
        };
        let line = serde_json::to_string(&rec).expect("record serialises");
        self.write_line(&line)?;
        self.last_chrono = e.chrono;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    /// Flushes and returns the number of events written.
    pub fn finish(mut self) -> Result<u64, TraceError> {
        self.out.flush().map_err(|source| TraceError::Io {
            path: self.path.clone(),
            source,
        })?;
        Ok(self.written)
    }
}

/// Writes every event of `source` to `path`, keeping only the optional
/// attributes enabled in `mask`. Returns the number of events written.
pub fn record(
    mut source: impl TraceSource,
    path: impl AsRef<Path>,
    mask: AttributeMask,
) -> Result<u64, TraceError> {
    let mut w = TraceWriter::create(path, mask)?;
    while let Some(e) = source.next_event()? {
        w.write_event(&e.masked(mask))?;
    }
    w.finish()
}

/// Opens a recorded trace for replay.
pub fn replay(path: impl AsRef<Path>) -> Result<FileSource, TraceError> {
    FileSource::open(path)
}

/// Replays a trace file event by event.
pub struct FileSource {
    path: PathBuf,
    reader: BufReader<File>,
    header: TraceHeader,
    mask: AttributeMask,
    line_no: usize,
    buf: String,
    last_chrono: u64,
}

impl FileSource {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|source| TraceError::Io {
            path: path.clone(),
            source,
        })?;
        let mut src = FileSource {
            path,
            reader: BufReader::new(file),
            header: TraceHeader {
                format: String::new(),
                version: 0,
                mask: Vec::new(),
            },
            mask: AttributeMask::none(),
            line_no: 0,
            buf: String::new(),
            last_chrono: 0,
        };
        if !src.read_line()? {
            return Err(src.malformed("missing header"));
        }
        let header: TraceHeader =
            serde_json::from_str(src.buf.trim_end_matches('\n')).map_err(|e| src.malformed(e))?;
        if header.format != FORMAT_NAME {
            return Err(src.malformed(format!("not a trace file (format `{}`)", header.format)));
        }
        if header.version != FORMAT_VERSION {
            return Err(TraceError::Version {
                path: src.path.clone(),
                found: header.version,
                expected: FORMAT_VERSION,
            });
        }
        src.mask = AttributeMask::from_names(header.mask.iter().map(String::as_str))
            .map_err(|e| src.malformed(e))?;
        src.header = header;
        Ok(src)
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    pub fn mask(&self) -> AttributeMask {
        self.mask
    }

    fn malformed(&self, message: impl ToString) -> TraceError {
        TraceError::Malformed {
            path: self.path.clone(),
            line: self.line_no,
            message: message.to_string(),
        }
    }

    /// Reads one complete line into `buf`; false at clean end of file.
    fn read_line(&mut self) -> Result<bool, TraceError> {
        self.buf.clear();
        let n = self
            .reader
            .read_line(&mut self.buf)
            .map_err(|source| TraceError::Io {
                path: self.path.clone(),
                source,
            })?;
        if n == 0 {
            return Ok(false);
        }
        self.line_no += 1;
        if !self.buf.ends_with('\n') {
            return Err(self.malformed("truncated record (no line terminator)"));
        }
        Ok(true)
    }

    fn decode(&self, rec: RecordIn) -> Result<Event, TraceError> {
        let bad = |m: String| self.malformed(m);
        let port: Port = rec
            .port
            .parse()
            .map_err(|e: crate::event::ParseError| bad(e.message))?;
        let det: Determinism = rec
            .det
            .parse()
            .map_err(|e: crate::event::ParseError| bad(e.message))?;
        let proc_type: ProcType = rec
            .proc
            .proc_type
            .parse()
            .map_err(|e: crate::event::ParseError| bad(e.message))?;
        let goal_path = rec
            .goal_path
            .iter()
            .map(|s| s.parse::<GoalPathStep>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(e.message))?;
        let missing = |name: &str| bad(format!("missing `{name}`, which the header mask enables"));
        let unexpected =
            |name: &str| bad(format!("`{name}` present but disabled by the header mask"));
        let m = self.mask;
        let args = match (m.args, rec.args) {
            (true, Some(a)) => Some(
                a.iter()
                    .map(|t| Term::parse(t))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| bad(format!("bad term: {e}")))?,
            ),
            (true, None) => return Err(missing("args")),
            (false, Some(_)) => return Err(unexpected("args")),
            (false, None) => None,
        };
        let arg_types = match (m.arg_types, rec.arg_types) {
            (true, Some(a)) => Some(a),
            (true, None) => return Err(missing("arg_types")),
            (false, Some(_)) => return Err(unexpected("arg_types")),
            (false, None) => None,
        };
        let local_vars = match (m.local_vars, rec.local_vars) {
            (true, Some(vars)) => Some(
                vars.into_iter()
                    .map(|v| {
                        Ok(LiveVar {
                            value: Term::parse(&v.value)
                                .map_err(|e| bad(format!("bad term: {e}")))?,
                            name: v.name,
                            type_name: v.type_name,
                        })
                    })
                    .collect::<Result<Vec<_>, TraceError>>()?,
            ),
            (true, None) => return Err(missing("local_vars")),
            (false, Some(_)) => return Err(unexpected("local_vars")),
            (false, None) => None,
        };
        let line_number = match (m.line_number, rec.line) {
            (true, l) => Some(l),
            (false, Some(_)) => return Err(unexpected("line")),
            (false, None) => None,
        };
        Ok(Event {
            chrono: rec.chrono,
            call: rec.call,
            depth: rec.depth,
            port,
            det,
            proc: Arc::new(ProcId {
                proc_type,
                def_module: rec.proc.def_module,
                decl_module: rec.proc.decl_module,
                name: rec.proc.name,
                arity: rec.proc.arity,
                mode_number: rec.proc.mode,
            }),
            goal_path,
            args,
            arg_types,
            local_vars,
            line_number,
        })
    }
}

impl TraceSource for FileSource {
    fn next_event(&mut self) -> Result<Option<Event>, TraceError> {
        if !self.read_line()? {
            return Ok(None);
        }
        let rec: RecordIn =
            serde_json::from_str(self.buf.trim_end_matches('\n')).map_err(|e| self.malformed(e))?;
        let event = self.decode(rec)?;
        if event.chrono <= self.last_chrono {
            return Err(self.malformed(format!(
                "chrono {} does not follow {}",
                event.chrono, self.last_chrono
            )));
        }
        self.last_chrono = event.chrono;
        Ok(Some(event))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_io::{drain, VecSource};

    fn ev(chrono: u64, port: Port) -> Event {
        Event {
            chrono,
            call: 1,
            depth: 1,
            port,
            det: Determinism::Det,
            proc: Arc::new(ProcId::predicate("m", "p", 1)),
            goal_path: Vec::new(),
            args: Some(vec![Term::Int(chrono as i64)]),
            arg_types: Some(vec!["int".into()]),
            local_vars: Some(vec![]),
            line_number: Some(Some(3)),
        }
    }

    #[test]
    fn empty_source_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trace");
        let n = record(VecSource::new([]), &path, AttributeMask::default()).unwrap();
        assert_eq!(n, 0);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "{\"format\":\"tracefold-trace\",\"version\":1,\"mask\":[\"arg_types\",\"local_vars\"]}\n"
        );
        assert!(replay(&path).unwrap().next_event().unwrap().is_none());
    }

    #[test]
    fn record_layout_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trace");
        let events = vec![ev(1, Port::Call), ev(2, Port::Exit)];
        record(VecSource::new(events.clone()), &path, AttributeMask::all()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let second = text.lines().nth(1).unwrap();
        assert_eq!(
            second,
            r#"{"chrono":1,"call":1,"depth":1,"port":"call","det":"det","proc":{"type":"predicate","def_module":"m","decl_module":"m","name":"p","arity":1,"mode":0},"goal_path":[],"args":["1"],"arg_types":["int"],"local_vars":[],"line":3}"#
        );
        assert_eq!(drain(replay(&path).unwrap()).unwrap(), events);
    }

    #[test]
    fn masked_fields_are_omitted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trace");
        record(
            VecSource::new([ev(1, Port::Call)]),
            &path,
            AttributeMask::default(),
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains("\"args\""));
        assert!(!text.contains("\"line\""));
        let back = drain(replay(&path).unwrap()).unwrap();
        assert_eq!(back[0].args, None);
        assert!(back[0].line_number().is_err());
    }

    #[test]
    fn non_monotone_source_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trace");
        let err = record(
            VecSource::new([ev(2, Port::Call), ev(2, Port::Exit)]),
            &path,
            AttributeMask::all(),
        )
        .unwrap_err();
        assert!(
            matches!(err, TraceError::Integrity { chrono: 2, .. }),
            "{err}"
        );
    }

    #[test]
    fn truncated_last_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trace");
        record(
            VecSource::new([ev(1, Port::Call), ev(2, Port::Exit)]),
            &path,
            AttributeMask::all(),
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() - 10]).unwrap();
        let mut src = replay(&path).unwrap();
        assert!(src.next_event().unwrap().is_some());
        match src.next_event().unwrap_err() {
            TraceError::Malformed { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn version_mismatch_names_both_versions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trace");
        std::fs::write(
            &path,
            "{\"format\":\"tracefold-trace\",\"version\":7,\"mask\":[]}\n",
        )
        .unwrap();
        let err = replay(&path).err().unwrap();
        let msg = err.to_string();
        assert!(msg.contains('7') && msg.contains('1'), "{msg}");
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            replay("/nonexistent/x.trace").err().unwrap(),
            TraceError::Io { .. }
        ));
    }
}
