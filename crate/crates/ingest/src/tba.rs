//! Division data from The Blue Alliance API v3.
//!
//! Three read-only endpoints are used: `/event/{key}/matches`,
//! `/event/{key}/rankings` and `/event/{key}/alliances`. Responses pass
//! through a [`Transport`], so recorded fixtures can stand in for the
//! network and replay to byte-identical snapshot files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, Utc};
use frc_core::{validate_snapshot, RawMatch, RawSnapshot};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{IngestError, Result};
use crate::snapshot_file::{write_atomic, SnapshotFile};

pub const DEFAULT_BASE_URL: &str = "https://www.thebluealliance.com/api/v3";
pub const AUTH_HEADER: &str = "X-TBA-Auth-Key";
pub const TOKEN_ENV: &str = "TBA_AUTH_KEY";
/// Divisions fetched concurrently by [`TbaClient::fetch_many`].
pub const MAX_IN_FLIGHT: usize = 4;

const MAX_RETRY_DELAY: Duration = Duration::from_secs(60);

/// An API token; never printed.
#[derive(Clone)]
pub struct AuthToken(String);

impl AuthToken {
    pub fn new(token: impl Into<String>) -> Result<Self> {
        let token = token.into();
        if token.trim().is_empty() {
            return Err(IngestError::AuthFailed("empty API token".into()));
        }
        Ok(AuthToken(token))
    }

    pub fn from_env() -> Result<Self> {
        match std::env::var(TOKEN_ENV) {
            Ok(token) => Self::new(token),
            Err(_) => Err(IngestError::AuthFailed(format!("{TOKEN_ENV} is not set"))),
        }
    }
}

impl std::fmt::Debug for AuthToken {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("AuthToken(<redacted>)")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    /// Lower-case header names.
    pub headers: BTreeMap<String, String>,
    pub body: Vec<u8>,
}

impl HttpResponse {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(&name.to_ascii_lowercase()).map(String::as_str)
    }
}

pub trait Transport: Send + Sync {
    /// Performs one GET. `Err` means no HTTP response was received.
    fn get(&self, url: &str, headers: &[(&str, &str)]) -> std::result::Result<HttpResponse, String>;
}

impl<T: Transport + ?Sized> Transport for std::sync::Arc<T> {
    fn get(&self, url: &str, headers: &[(&str, &str)]) -> std::result::Result<HttpResponse, String> {
        (**self).get(url, headers)
    }
}

/// Live HTTP through a blocking client.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpTransport { agent }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(30))
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str, headers: &[(&str, &str)]) -> std::result::Result<HttpResponse, String> {
        let mut request = self.agent.get(url);
        for (name, value) in headers {
            request = request.header(*name, *value);
        }
        let mut response = request.call().map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let headers = response
            .headers()
            .iter()
            .filter_map(|(k, v)| Some((k.as_str().to_ascii_lowercase(), v.to_str().ok()?.to_string())))
            .collect();
        let body = response.body_mut().read_to_vec().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, headers, body })
    }
}

/// One recorded response on disk: status, headers, and the body as JSON
/// (or a string when the body was not JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub status: u16,
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    pub body: Value,
}

impl Fixture {
    fn from_response(response: &HttpResponse) -> Self {
        let body = serde_json::from_slice(&response.body)
            .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&response.body).into_owned()));
        Fixture {
            status: response.status,
            headers: response.headers.clone(),
            body,
        }
    }

    fn into_response(self) -> HttpResponse {
        let body = match self.body {
            Value::String(s) => s.into_bytes(),
            other => serde_json::to_vec(&other).expect("JSON value serializes"),
        };
        HttpResponse {
            status: self.status,
            headers: self
                .headers
                .into_iter()
                .map(|(k, v)| (k.to_ascii_lowercase(), v))
                .collect(),
            body,
        }
    }
}

/// File name for the fixture of `url`: the path below the API root with
/// `/` replaced by `_`, e.g. `event_2018carv_matches.json`.
pub fn fixture_name(url: &str) -> String {
    let path = url.split_once("/api/v3/").map_or(url, |(_, rest)| rest);
    let path = path.trim_start_matches('/');
    format!("{}.json", path.replace('/', "_"))
}

/// Replays responses recorded in a directory; never touches the network.
pub struct FixtureTransport {
    dir: PathBuf,
}

impl FixtureTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureTransport { dir: dir.into() }
    }
}

impl Transport for FixtureTransport {
    fn get(&self, url: &str, _headers: &[(&str, &str)]) -> std::result::Result<HttpResponse, String> {
        let path = self.dir.join(fixture_name(url));
        let text = std::fs::read(&path).map_err(|e| format!("no fixture {}: {e}", path.display()))?;
        let fixture: Fixture =
            serde_json::from_slice(&text).map_err(|e| format!("bad fixture {}: {e}", path.display()))?;
        Ok(fixture.into_response())
    }
}

/// Passes requests to `inner` and writes each response as a fixture.
pub struct RecordingTransport<T> {
    inner: T,
    dir: PathBuf,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, dir: impl Into<PathBuf>) -> Self {
        RecordingTransport { inner, dir: dir.into() }
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn get(&self, url: &str, headers: &[(&str, &str)]) -> std::result::Result<HttpResponse, String> {
        let response = self.inner.get(url, headers)?;
        let fixture = Fixture::from_response(&response);
        let mut bytes = serde_json::to_vec_pretty(&fixture).expect("fixture serializes");
        bytes.push(b'\n');
        write_atomic(&self.dir.join(fixture_name(url)), &bytes, true).map_err(|e| e.to_string())?;
        Ok(response)
    }
}

type Sleeper = Box<dyn Fn(Duration) + Send + Sync>;

pub struct TbaClient<T> {
    transport: T,
    token: AuthToken,
    base_url: String,
    max_attempts: u32,
    base_delay: Duration,
    sleep: Sleeper,
}

impl<T: Transport> TbaClient<T> {
    /// Three attempts per request, backing off 1 s then 2 s unless the server
    /// asks for longer.
    pub fn new(transport: T, token: AuthToken) -> Self {
        TbaClient {
            transport,
            token,
            base_url: DEFAULT_BASE_URL.to_string(),
            max_attempts: 3,
            base_delay: Duration::from_secs(1),
            sleep: Box::new(std::thread::sleep),
        }
    }

    pub fn with_base_url(mut self, url: impl Into<String>) -> Self {
        self.base_url = url.into().trim_end_matches('/').to_string();
        self
    }

    pub fn with_retry(mut self, max_attempts: u32, base_delay: Duration) -> Self {
        self.max_attempts = max_attempts.max(1);
        self.base_delay = base_delay;
        self
    }

    /// Replaces the function used to wait between attempts.
    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Box::new(sleep);
        self
    }

    fn get(&self, event_key: &str, endpoint: &str) -> Result<(Value, HttpResponse)> {
        let url = format!("{}/event/{event_key}/{endpoint}", self.base_url);
        let headers = [(AUTH_HEADER, self.token.0.as_str()), ("Accept", "application/json")];
        let mut attempt = 1;
        loop {
            let outcome = self.transport.get(&url, &headers);
            let retry_after = match &outcome {
                Ok(r) if r.status == 429 || r.status >= 500 => r.header("retry-after").and_then(parse_retry_after),
                Ok(_) => None,
                Err(_) => None,
            };
            let retryable = match &outcome {
                Ok(r) => r.status == 429 || r.status >= 500,
                Err(_) => true,
            };
            if retryable && attempt < self.max_attempts {
                let backoff = self.base_delay * 2u32.pow(attempt - 1);
                let delay = retry_after.map_or(backoff, |d| d.max(backoff)).min(MAX_RETRY_DELAY);
                log::warn!("GET {url} attempt {attempt} failed; retrying in {delay:?}");
                (self.sleep)(delay);
                attempt += 1;
                continue;
            }
            let response = outcome.map_err(|reason| IngestError::Http {
                url: url.clone(),
                reason,
            })?;
            return match response.status {
                200 => {
                    let value = serde_json::from_slice(&response.body).map_err(|e| IngestError::SchemaDrift {
                        endpoint: endpoint.to_string(),
                        field: format!("<body: {e}>"),
                    })?;
                    Ok((value, response))
                }
                401 | 403 => Err(IngestError::AuthFailed(format!("server answered {}", response.status))),
                404 => Err(IngestError::EventNotFound(event_key.to_string())),
                429 => Err(IngestError::RateLimited { retry_after }),
                status => Err(IngestError::Http {
                    url,
                    reason: format!("status {status}"),
                }),
            };
        }
    }

    /// Fetches and normalizes one division.
    pub fn fetch_division(&self, event_key: &str) -> Result<SnapshotFile> {
        if event_key.is_empty() || !event_key.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(IngestError::EventNotFound(event_key.to_string()));
        }
        let (matches, response) = self.get(event_key, "matches")?;
        let (rankings, _) = self.get(event_key, "rankings")?;
        let (alliances, _) = self.get(event_key, "alliances")?;

        let fetched_at = response
            .header("date")
            .and_then(|d| DateTime::parse_from_rfc2822(d).ok())
            .map(|d| d.with_timezone(&Utc))
            .unwrap_or_else(|| {
                log::warn!("no usable Date header; stamping with the local clock");
                Utc::now()
            });

        let raw = normalize(event_key, &matches, &rankings, &alliances)?;
        validate_snapshot(&raw)?;
        let mut file = SnapshotFile::from_raw(raw, fetched_at);
        file.rankings_audit = Some(rankings);
        Ok(file)
    }

    /// Fetches several divisions, at most [`MAX_IN_FLIGHT`] at a time; results
    /// are in the order of `keys`.
    pub fn fetch_many(&self, keys: &[&str]) -> Vec<Result<SnapshotFile>> {
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<Result<SnapshotFile>>>> = Mutex::new((0..keys.len()).map(|_| None).collect());
        std::thread::scope(|scope| {
            for _ in 0..MAX_IN_FLIGHT.min(keys.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(key) = keys.get(i) else { break };
                    let result = self.fetch_division(key);
                    results.lock().expect("no poisoned fetch")[i] = Some(result);
                });
            }
        });
        results
            .into_inner()
            .expect("no poisoned fetch")
            .into_iter()
            .map(|r| r.expect("every key fetched"))
            .collect()
    }
}

fn parse_retry_after(value: &str) -> Option<Duration> {
    value.trim().parse::<u64>().ok().map(Duration::from_secs)
}

fn drift(endpoint: &str, field: impl Into<String>) -> IngestError {
    IngestError::SchemaDrift {
        endpoint: endpoint.to_string(),
        field: field.into(),
    }
}

fn level_order(level: &str) -> Option<u8> {
    match level {
        "qm" => Some(0),
        "ef" => Some(1),
        "qf" => Some(2),
        "sf" => Some(3),
        "f" => Some(4),
        _ => None,
    }
}

struct ParsedMatch {
    level: u8,
    set: u64,
    number: u64,
    blue: Vec<String>,
    red: Vec<String>,
    blue_score: Option<i64>,
    red_score: Option<i64>,
}

fn parse_match(value: &Value, i: usize) -> Result<ParsedMatch> {
    let field = |name: &str| format!("[{i}].{name}");
    let level = value
        .get("comp_level")
        .and_then(Value::as_str)
        .and_then(level_order)
        .ok_or_else(|| drift("matches", field("comp_level")))?;
    let number = value
        .get("match_number")
        .and_then(Value::as_u64)
        .ok_or_else(|| drift("matches", field("match_number")))?;
    let set = value.get("set_number").and_then(Value::as_u64).unwrap_or(1);
    let alliance = |color: &str| -> Result<(Vec<String>, Option<i64>)> {
        let a = value
            .get("alliances")
            .and_then(|v| v.get(color))
            .ok_or_else(|| drift("matches", field(&format!("alliances.{color}"))))?;
        let teams = a
            .get("team_keys")
            .and_then(Value::as_array)
            .and_then(|t| {
                t.iter()
                    .map(|k| k.as_str().map(String::from))
                    .collect::<Option<Vec<_>>>()
            })
            .ok_or_else(|| drift("matches", field(&format!("alliances.{color}.team_keys"))))?;
        // TBA reports -1 (or null) for matches not yet played
        let score = match a.get("score") {
            Some(Value::Null) | None => None,
            Some(v) => Some(
                v.as_i64()
                    .ok_or_else(|| drift("matches", field(&format!("alliances.{color}.score"))))?,
            ),
        };
        Ok((teams, score.filter(|&s| s >= 0)))
    };
    let (blue, blue_score) = alliance("blue")?;
    let (red, red_score) = alliance("red")?;
    Ok(ParsedMatch {
        level,
        set,
        number,
        blue,
        red,
        blue_score,
        red_score,
    })
}

/// Builds the key-based snapshot from the three payloads. Unplayed matches
/// are dropped; playoff matches are numbered 1.. in bracket order.
pub fn normalize(event_key: &str, matches: &Value, rankings: &Value, alliances: &Value) -> Result<RawSnapshot> {
    let list = matches.as_array().ok_or_else(|| drift("matches", "<array>"))?;
    let mut parsed = list
        .iter()
        .enumerate()
        .map(|(i, m)| parse_match(m, i))
        .collect::<Result<Vec<_>>>()?;
    parsed.sort_by_key(|m| (m.level, m.set, m.number));

    let mut qual_matches = Vec::new();
    let mut playoff_matches = Vec::new();
    for m in parsed {
        let (Some(blue_score), Some(red_score)) = (m.blue_score, m.red_score) else {
            log::info!(
                "{event_key}: skipping unplayed match (level {}, set {}, number {})",
                m.level,
                m.set,
                m.number
            );
            continue;
        };
        let qual = m.level == 0;
        let raw = RawMatch {
            match_no: if qual {
                u32::try_from(m.number).map_err(|_| drift("matches", "match_number"))?
            } else {
                playoff_matches.len() as u32 + 1
            },
            blue: m.blue,
            red: m.red,
            blue_score,
            red_score,
        };
        if qual {
            qual_matches.push(raw);
        } else {
            playoff_matches.push(raw);
        }
    }

    let entries = rankings
        .get("rankings")
        .and_then(Value::as_array)
        .ok_or_else(|| drift("rankings", "rankings"))?;
    let mut ranked = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        let team = entry
            .get("team_key")
            .and_then(Value::as_str)
            .ok_or_else(|| drift("rankings", format!("rankings[{i}].team_key")))?;
        let rank = entry
            .get("rank")
            .and_then(Value::as_u64)
            .ok_or_else(|| drift("rankings", format!("rankings[{i}].rank")))?;
        ranked.push((rank, team.to_string()));
    }
    ranked.sort();
    let roster: Vec<String> = ranked.iter().map(|(_, t)| t.clone()).collect();
    let frc_ratings = ranked.iter().map(|(rank, t)| (t.clone(), -(*rank as f64))).collect();

    Ok(RawSnapshot {
        division_key: event_key.to_string(),
        roster,
        qual_matches,
        playoff_matches,
        frc_ratings,
        playoff_roster: playoff_roster(alliances)?,
    })
}

/// Alliance captains in alliance order, then the remaining picks and any
/// backup robot that played.
fn playoff_roster(alliances: &Value) -> Result<Vec<String>> {
    let list = match alliances {
        Value::Null => return Ok(vec![]),
        Value::Array(list) => list,
        _ => return Err(drift("alliances", "<array>")),
    };
    let mut picks = Vec::with_capacity(list.len());
    for (i, a) in list.iter().enumerate() {
        let p = a
            .get("picks")
            .and_then(Value::as_array)
            .and_then(|p| {
                p.iter()
                    .map(|k| k.as_str().map(String::from))
                    .collect::<Option<Vec<_>>>()
            })
            .ok_or_else(|| drift("alliances", format!("[{i}].picks")))?;
        let backup = a
            .get("backup")
            .and_then(|b| b.get("in"))
            .and_then(Value::as_str)
            .map(String::from);
        picks.push((p, backup));
    }
    let mut roster: Vec<String> = Vec::new();
    let mut push = |key: &String| {
        if !roster.contains(key) {
            roster.push(key.clone());
        }
    };
    picks.iter().filter_map(|(p, _)| p.first()).for_each(&mut push);
    for (p, backup) in &picks {
        p.iter().skip(1).chain(backup).for_each(&mut push);
    }
    Ok(roster)
}

/// Writes the fixture set a [`FixtureTransport`] replays for `event_key`.
pub fn write_fixture(dir: &Path, url: &str, fixture: &Fixture) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(fixture).expect("fixture serializes");
    bytes.push(b'\n');
    write_atomic(&dir.join(fixture_name(url)), &bytes, true)
}
