//! Embedded relational persistence: per-disease weekly tables, users, admins,
//! sessions and the alert audit log.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, Mutex, MutexGuard};

use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::Argon2;
use chrono::{DateTime, Duration, Utc};
use epiwatch_core::timeseries::{Disease, WeekKey};
use rand::RngCore;
use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SESSION_TTL_HOURS: i64 = 12;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum StoreError {
    #[error("storage unavailable: {0}")]
    StorageUnavailable(String),
    #[error("invalid data: {0}")]
    Validation(String),
    #[error("email already registered")]
    DuplicateEmail,
    #[error("invalid credentials")]
    InvalidCredentials,
    #[error("session missing or expired")]
    InvalidSession,
    #[error("{0} not found")]
    NotFound(String),
    #[error("storage error: {0}")]
    Sql(String),
}

impl From<rusqlite::Error> for StoreError {
    fn from(e: rusqlite::Error) -> Self {
        StoreError::Sql(e.to_string())
    }
}

fn validation(msg: impl Into<String>) -> StoreError {
    StoreError::Validation(msg.into())
}

/// Source of "now" for session expiry and alert timestamps.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A settable clock for tests.
pub struct ManualClock(Mutex<DateTime<Utc>>);

impl ManualClock {
    pub fn new(at: DateTime<Utc>) -> Self {
        Self(Mutex::new(at))
    }

    pub fn set(&self, at: DateTime<Utc>) {
        *self.0.lock().unwrap_or_else(|e| e.into_inner()) = at;
    }

    pub fn advance(&self, by: Duration) {
        let mut g = self.0.lock().unwrap_or_else(|e| e.into_inner());
        *g += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock().unwrap_or_else(|e| e.into_inner())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Pharmacy,
    HealthCenter,
    Hospital,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Pharmacy, Category::HealthCenter, Category::Hospital];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Pharmacy => "pharmacy",
            Category::HealthCenter => "health_center",
            Category::Hospital => "hospital",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| validation(format!("unknown category {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewUser {
    pub name: String,
    /// E.164 text, e.g. `+15550100`.
    pub phone: String,
    pub organisation_name: String,
    pub organisation_address: String,
    pub category: Category,
    pub email: String,
}

impl NewUser {
    fn validate(&self) -> Result<(), StoreError> {
        if self.name.trim().is_empty() {
            return Err(validation("name is empty"));
        }
        let digits = self.phone.strip_prefix('+').unwrap_or("");
        if digits.is_empty() || digits.len() > 15 || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(validation(format!("phone {:?} is not E.164", self.phone)));
        }
        if !self.email.contains('@') || self.email.trim() != self.email {
            return Err(validation(format!("email {:?} is malformed", self.email)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub id: i64,
    #[serde(flatten)]
    pub user: NewUser,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdminRecord {
    pub id: i64,
    pub name: String,
    pub email: String,
}

/// One week of one disease table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseWeekRow {
    pub week: WeekKey,
    pub precipitation: f64,
    pub temperature: f64,
    pub search_volume: f64,
    pub tweet_count: i64,
    pub cases: i64,
}

impl DiseaseWeekRow {
    pub fn validate(&self) -> Result<(), StoreError> {
        if self.cases < 0 {
            return Err(validation(format!("cases must be non-negative, got {}", self.cases)));
        }
        if self.tweet_count < 0 {
            return Err(validation(format!("tweet_count must be non-negative, got {}", self.tweet_count)));
        }
        for (name, v) in [
            ("precipitation", self.precipitation),
            ("temperature", self.temperature),
            ("search_volume", self.search_volume),
        ] {
            if !v.is_finite() {
                return Err(validation(format!("{name} is not finite")));
            }
        }
        if self.precipitation < 0.0 || self.search_volume < 0.0 {
            return Err(validation("precipitation and search_volume must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryStatus {
    Sent,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub user_id: i64,
    pub phone: String,
    pub status: DeliveryStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertLogRow {
    /// Assigned by the store; ignored on insert.
    #[serde(default)]
    pub id: i64,
    pub timestamp: DateTime<Utc>,
    pub diseases: Vec<Disease>,
    pub categories: Vec<Category>,
    pub message: String,
    pub recipient_count: usize,
    pub deliveries: Vec<Delivery>,
}

impl AlertLogRow {
    pub fn sent(&self) -> usize {
        self.deliveries.iter().filter(|d| d.status == DeliveryStatus::Sent).count()
    }

    pub fn failed(&self) -> usize {
        self.deliveries.len() - self.sent()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionToken {
    pub token: String,
    pub expires_at: DateTime<Utc>,
}

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS admins (
    id INTEGER PRIMARY KEY,
    name TEXT NOT NULL,
    email TEXT NOT NULL UNIQUE,
    password_hash TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS users (
    id INTEGER PRIMARY KEY,
    name TEXT NOT NULL,
    phone TEXT NOT NULL CHECK (phone <> ''),
    organisation_name TEXT NOT NULL,
    organisation_address TEXT NOT NULL,
    category TEXT NOT NULL CHECK (category IN ('pharmacy', 'health_center', 'hospital')),
    email TEXT NOT NULL UNIQUE
);
CREATE TABLE IF NOT EXISTS sessions (
    token TEXT PRIMARY KEY,
    admin_id INTEGER NOT NULL REFERENCES admins(id),
    expires_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS alert_log (
    id INTEGER PRIMARY KEY,
    created_at TEXT NOT NULL,
    diseases TEXT NOT NULL,
    categories TEXT NOT NULL,
    message TEXT NOT NULL,
    recipient_count INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS deliveries (
    alert_id INTEGER NOT NULL REFERENCES alert_log(id),
    position INTEGER NOT NULL,
    user_id INTEGER NOT NULL,
    phone TEXT NOT NULL,
    status TEXT NOT NULL CHECK (status IN ('sent', 'failed')),
    detail TEXT,
    PRIMARY KEY (alert_id, position)
);
";

fn week_table(disease: Disease) -> &'static str {
    match disease {
        Disease::Influenza => "influenza_weeks",
        Disease::Malaria => "malaria_weeks",
        Disease::Hepatitis => "hepatitis_weeks",
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

/// Thread-safe handle; clones share one connection, so writes are serialized.
#[derive(Clone)]
pub struct Store {
    conn: Arc<Mutex<Connection>>,
    clock: Arc<dyn Clock>,
    session_ttl: Duration,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store").field("session_ttl", &self.session_ttl).finish()
    }
}

impl Store {
    /// Opens or creates the database file. Does not migrate.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let conn = Connection::open(path)
            .map_err(|e| StoreError::StorageUnavailable(format!("{}: {e}", path.display())))?;
        Self::from_connection(conn)
    }

    pub fn open_in_memory() -> Result<Self, StoreError> {
        let conn = Connection::open_in_memory().map_err(|e| StoreError::StorageUnavailable(e.to_string()))?;
        Self::from_connection(conn)
    }

    fn from_connection(conn: Connection) -> Result<Self, StoreError> {
        conn.busy_timeout(std::time::Duration::from_secs(5))
            .and_then(|_| conn.execute_batch("PRAGMA foreign_keys = ON;"))
            .map_err(|e| StoreError::StorageUnavailable(e.to_string()))?;
        Ok(Self {
            conn: Arc::new(Mutex::new(conn)),
            clock: Arc::new(SystemClock),
            session_ttl: Duration::hours(DEFAULT_SESSION_TTL_HOURS),
        })
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_session_ttl(mut self, ttl: Duration) -> Self {
        self.session_ttl = ttl;
        self
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    fn conn(&self) -> MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Creates every table when missing. Idempotent.
    pub fn migrate(&self) -> Result<u32, StoreError> {
        let mut conn = self.conn();
        let unavailable = |e: rusqlite::Error| StoreError::StorageUnavailable(e.to_string());
        let tx = conn.transaction().map_err(unavailable)?;
        let current: u32 = tx.query_row("PRAGMA user_version", [], |r| r.get(0)).map_err(unavailable)?;
        if current < SCHEMA_VERSION {
            tx.execute_batch(SCHEMA).map_err(unavailable)?;
            for d in Disease::ALL {
                tx.execute_batch(&format!(
                    "CREATE TABLE IF NOT EXISTS {} (
                        id INTEGER PRIMARY KEY,
                        week TEXT NOT NULL UNIQUE,
                        precipitation REAL NOT NULL,
                        temperature REAL NOT NULL,
                        search_volume REAL NOT NULL,
                        tweet_count INTEGER NOT NULL CHECK (tweet_count >= 0),
                        cases INTEGER NOT NULL CHECK (cases >= 0)
                    );",
                    week_table(d)
                ))
                .map_err(unavailable)?;
            }
            tx.execute_batch(&format!("PRAGMA user_version = {SCHEMA_VERSION};"))
                .map_err(unavailable)?;
        }
        tx.commit().map_err(unavailable)?;
        Ok(SCHEMA_VERSION)
    }

    pub fn schema_version(&self) -> Result<u32, StoreError> {
        Ok(self.conn().query_row("PRAGMA user_version", [], |r| r.get(0))?)
    }

    /// Inserts or replaces the row for `(disease, row.week)`.
    pub fn upsert_week(&self, disease: Disease, row: &DiseaseWeekRow) -> Result<(), StoreError> {
        row.validate()?;
        self.conn().execute(
            &format!(
                "INSERT INTO {} (week, precipitation, temperature, search_volume, tweet_count, cases)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6)
                 ON CONFLICT(week) DO UPDATE SET precipitation = excluded.precipitation,
                   temperature = excluded.temperature, search_volume = excluded.search_volume,
                   tweet_count = excluded.tweet_count, cases = excluded.cases",
                week_table(disease)
            ),
            params![
                row.week.to_string(),
                row.precipitation,
                row.temperature,
                row.search_volume,
                row.tweet_count,
                row.cases
            ],
        )?;
        Ok(())
    }

    /// Upserts many rows in one transaction.
    pub fn upsert_weeks(&self, disease: Disease, rows: &[DiseaseWeekRow]) -> Result<(), StoreError> {
        for r in rows {
            r.validate()?;
        }
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        {
            let mut stmt = tx.prepare(&format!(
                "INSERT INTO {} (week, precipitation, temperature, search_volume, tweet_count, cases)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6)
                 ON CONFLICT(week) DO UPDATE SET precipitation = excluded.precipitation,
                   temperature = excluded.temperature, search_volume = excluded.search_volume,
                   tweet_count = excluded.tweet_count, cases = excluded.cases",
                week_table(disease)
            ))?;
            for row in rows {
                stmt.execute(params![
                    row.week.to_string(),
                    row.precipitation,
                    row.temperature,
                    row.search_volume,
                    row.tweet_count,
                    row.cases
                ])?;
            }
        }
        tx.commit()?;
        Ok(())
    }

    /// The latest `n` weeks in ascending order.
    pub fn query_last_n(&self, disease: Disease, n: usize) -> Result<Vec<DiseaseWeekRow>, StoreError> {
        let mut rows = self.select_weeks(disease, Some(n))?;
        rows.reverse();
        Ok(rows)
    }

    /// Every stored week in ascending order.
    pub fn query_all(&self, disease: Disease) -> Result<Vec<DiseaseWeekRow>, StoreError> {
        let mut rows = self.select_weeks(disease, None)?;
        rows.reverse();
        Ok(rows)
    }

    fn select_weeks(&self, disease: Disease, limit: Option<usize>) -> Result<Vec<DiseaseWeekRow>, StoreError> {
        let conn = self.conn();
        // zero-padded ISO week text sorts chronologically
        let mut stmt = conn.prepare(&format!(
            "SELECT week, precipitation, temperature, search_volume, tweet_count, cases
             FROM {} ORDER BY week DESC LIMIT ?1",
            week_table(disease)
        ))?;
        let limit = limit.map_or(-1, |n| n.min(i64::MAX as usize) as i64);
        let rows = stmt
            .query_map([limit], |r| {
                Ok((
                    r.get::<_, String>(0)?,
                    DiseaseWeekRow {
                        week: WeekKey::new(1970, 1).expect("valid week"),
                        precipitation: r.get(1)?,
                        temperature: r.get(2)?,
                        search_volume: r.get(3)?,
                        tweet_count: r.get(4)?,
                        cases: r.get(5)?,
                    },
                ))
            })?
            .collect::<Result<Vec<_>, _>>()?;
        rows.into_iter()
            .map(|(week, mut row)| {
                row.week = week
                    .parse()
                    .map_err(|_| StoreError::Sql(format!("corrupt week key {week:?}")))?;
                Ok(row)
            })
            .collect()
    }

    pub fn register_user(&self, user: &NewUser) -> Result<i64, StoreError> {
        user.validate()?;
        let conn = self.conn();
        let res = conn.execute(
            "INSERT INTO users (name, phone, organisation_name, organisation_address, category, email)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            params![
                user.name,
                user.phone,
                user.organisation_name,
                user.organisation_address,
                user.category.as_str(),
                user.email
            ],
        );
        match res {
            Ok(_) => Ok(conn.last_insert_rowid()),
            Err(rusqlite::Error::SqliteFailure(e, _)) if e.code == rusqlite::ErrorCode::ConstraintViolation => {
                Err(StoreError::DuplicateEmail)
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Users in id order; `None` lists every category.
    pub fn list_users(&self, category: Option<Category>) -> Result<Vec<UserRecord>, StoreError> {
        self.list_users_in(&category.map_or_else(|| Category::ALL.to_vec(), |c| vec![c]))
    }

    pub fn list_users_in(&self, categories: &[Category]) -> Result<Vec<UserRecord>, StoreError> {
        let conn = self.conn();
        let mut stmt = conn.prepare(
            "SELECT id, name, phone, organisation_name, organisation_address, category, email
             FROM users ORDER BY id",
        )?;
        let rows = stmt
            .query_map([], |r| {
                Ok((
                    r.get::<_, i64>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, String>(2)?,
                    r.get::<_, String>(3)?,
                    r.get::<_, String>(4)?,
                    r.get::<_, String>(5)?,
                    r.get::<_, String>(6)?,
                ))
            })?
            .collect::<Result<Vec<_>, _>>()?;
        let mut out = Vec::new();
        for (id, name, phone, organisation_name, organisation_address, category, email) in rows {
            let category: Category = category.parse()?;
            if categories.contains(&category) {
                out.push(UserRecord {
                    id,
                    user: NewUser {
                        name,
                        phone,
                        organisation_name,
                        organisation_address,
                        category,
                        email,
                    },
                });
            }
        }
        Ok(out)
    }

    /// Stores a salted Argon2id hash of `password`.
    pub fn create_admin(&self, name: &str, email: &str, password: &str) -> Result<i64, StoreError> {
        if !email.contains('@') {
            return Err(validation(format!("email {email:?} is malformed")));
        }
        if password.len() < 8 {
            return Err(validation("password needs at least 8 characters"));
        }
        let hash = hash_password(password)?;
        let conn = self.conn();
        match conn.execute(
            "INSERT INTO admins (name, email, password_hash) VALUES (?1, ?2, ?3)",
            params![name, email, hash],
        ) {
            Ok(_) => Ok(conn.last_insert_rowid()),
            Err(rusqlite::Error::SqliteFailure(e, _)) if e.code == rusqlite::ErrorCode::ConstraintViolation => {
                Err(StoreError::DuplicateEmail)
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn list_admins(&self) -> Result<Vec<AdminRecord>, StoreError> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT id, name, email FROM admins ORDER BY id")?;
        let rows = stmt
            .query_map([], |r| {
                Ok(AdminRecord {
                    id: r.get(0)?,
                    name: r.get(1)?,
                    email: r.get(2)?,
                })
            })?
            .collect::<Result<Vec<_>, _>>()?;
        Ok(rows)
    }

    /// Unknown emails still run a full hash verification, so both failures look alike.
    pub fn authenticate_admin(&self, email: &str, password: &str) -> Result<SessionToken, StoreError> {
        let found: Option<(i64, String)> = self
            .conn()
            .query_row(
                "SELECT id, password_hash FROM admins WHERE email = ?1",
                [email],
                |r| Ok((r.get(0)?, r.get(1)?)),
            )
            .optional()?;
        let (admin_id, stored) = match found {
            Some((id, h)) => (Some(id), h),
            None => (None, dummy_hash().to_string()),
        };
        let parsed = PasswordHash::new(&stored).map_err(|e| StoreError::Sql(e.to_string()))?;
        let ok = Argon2::default().verify_password(password.as_bytes(), &parsed).is_ok();
        let admin_id = match (ok, admin_id) {
            (true, Some(id)) => id,
            _ => return Err(StoreError::InvalidCredentials),
        };

        let mut bytes = [0u8; 32];
        rand::rngs::OsRng.fill_bytes(&mut bytes);
        let token = hex::encode(bytes);
        let expires_at = self.clock.now() + self.session_ttl;
        self.conn().execute(
            "INSERT INTO sessions (token, admin_id, expires_at) VALUES (?1, ?2, ?3)",
            params![token, admin_id, expires_at.to_rfc3339()],
        )?;
        Ok(SessionToken { token, expires_at })
    }

    /// The admin id owning a live token.
    pub fn validate_session(&self, token: &str) -> Result<i64, StoreError> {
        let row: Option<(i64, String)> = self
            .conn()
            .query_row(
                "SELECT admin_id, expires_at FROM sessions WHERE token = ?1",
                [token],
                |r| Ok((r.get(0)?, r.get(1)?)),
            )
            .optional()?;
        let (admin_id, expires) = row.ok_or(StoreError::InvalidSession)?;
        let expires = DateTime::parse_from_rfc3339(&expires)
            .map_err(|e| StoreError::Sql(e.to_string()))?
            .with_timezone(&Utc);
        if self.clock.now() >= expires {
            return Err(StoreError::InvalidSession);
        }
        Ok(admin_id)
    }

    /// Appends an alert and its deliveries; returns the new id.
    pub fn record_alert(&self, row: &AlertLogRow) -> Result<i64, StoreError> {
        if row.message.trim().is_empty() {
            return Err(validation("alert message is empty"));
        }
        if row.recipient_count != row.deliveries.len() {
            return Err(validation(format!(
                "recipient_count {} does not match {} delivery statuses",
                row.recipient_count,
                row.deliveries.len()
            )));
        }
        if row.diseases.is_empty() || row.categories.is_empty() {
            return Err(validation("alert needs at least one disease and one category"));
        }
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        tx.execute(
            "INSERT INTO alert_log (created_at, diseases, categories, message, recipient_count)
             VALUES (?1, ?2, ?3, ?4, ?5)",
            params![
                row.timestamp.to_rfc3339(),
                join(&row.diseases),
                join(&row.categories),
                row.message,
                row.recipient_count as i64
            ],
        )?;
        let id = tx.last_insert_rowid();
        for (pos, d) in row.deliveries.iter().enumerate() {
            let status = match d.status {
                DeliveryStatus::Sent => "sent",
                DeliveryStatus::Failed => "failed",
            };
            tx.execute(
                "INSERT INTO deliveries (alert_id, position, user_id, phone, status, detail)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
                params![id, pos as i64, d.user_id, d.phone, status, d.detail],
            )?;
        }
        tx.commit()?;
        Ok(id)
    }

    pub fn get_alert(&self, id: i64) -> Result<AlertLogRow, StoreError> {
        let conn = self.conn();
        let head: Option<(String, String, String, String, i64)> = conn
            .query_row(
                "SELECT created_at, diseases, categories, message, recipient_count FROM alert_log WHERE id = ?1",
                [id],
                |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?, r.get(4)?)),
            )
            .optional()?;
        let (created, diseases, categories, message, count) =
            head.ok_or_else(|| StoreError::NotFound(format!("alert {id}")))?;
        let corrupt = |what: &str| StoreError::Sql(format!("corrupt {what} in alert {id}"));
        let diseases = diseases
            .split(',')
            .map(|d| d.parse::<Disease>().map_err(|_| corrupt("disease")))
            .collect::<Result<Vec<_>, _>>()?;
        let categories = categories
            .split(',')
            .map(|c| c.parse::<Category>().map_err(|_| corrupt("category")))
            .collect::<Result<Vec<_>, _>>()?;
        let mut stmt = conn.prepare(
            "SELECT user_id, phone, status, detail FROM deliveries WHERE alert_id = ?1 ORDER BY position",
        )?;
        let deliveries = stmt
            .query_map([id], |r| {
                Ok(Delivery {
                    user_id: r.get(0)?,
                    phone: r.get(1)?,
                    status: if r.get::<_, String>(2)? == "sent" {
                        DeliveryStatus::Sent
                    } else {
                        DeliveryStatus::Failed
                    },
                    detail: r.get(3)?,
                })
            })?
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AlertLogRow {
            id,
            timestamp: DateTime::parse_from_rfc3339(&created)
                .map_err(|_| corrupt("timestamp"))?
                .with_timezone(&Utc),
            diseases,
            categories,
            message,
            recipient_count: count as usize,
            deliveries,
        })
    }

    pub fn alert_count(&self) -> Result<usize, StoreError> {
        let n: i64 = self.conn().query_row("SELECT COUNT(*) FROM alert_log", [], |r| r.get(0))?;
        Ok(n as usize)
    }
}

fn hash_password(password: &str) -> Result<String, StoreError> {
    let mut salt = [0u8; 16];
    rand::rngs::OsRng.fill_bytes(&mut salt);
    let salt = SaltString::encode_b64(&salt).map_err(|e| StoreError::Sql(e.to_string()))?;
    Argon2::default()
        .hash_password(password.as_bytes(), &salt)
        .map(|h| h.to_string())
        .map_err(|e| StoreError::Sql(e.to_string()))
}

fn dummy_hash() -> &'static str {
    static HASH: std::sync::OnceLock<String> = std::sync::OnceLock::new();
    HASH.get_or_init(|| hash_password("placeholder password").expect("argon2 with default params"))
}
