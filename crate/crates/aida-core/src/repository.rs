//! The definitions repository: durable storage for signed definitions,
//! transforms, and instances, keyed by unique IDs.
//!
//! Backend is a directory tree. Entry bytes live under `objects/`, one file
//! per entry named by a hash of (kind, id); a single line-oriented index
//! file (`index.tsv`) maps `kind<TAB>id<TAB>digest-hex<TAB>filename<TAB>
//! namespace-or-empty`. Writers serialize on an advisory lock and rewrite
//! the index via write-temp-then-rename, entry bytes first — so a crash can
//! leave orphan bytes (tolerated, swept on demand) but never an indexed
//! entry without its file. Readers see either the old index or the new one,
//! never a partial write.
//!
//! Material is checked at the door: an e-document whose signatures do not
//! all verify is refused. Fetch re-hashes the stored bytes against the
//! index before returning anything.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::os::fd::AsRawFd;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::edoc::{self, EDocument};
use crate::schema::parse_type_definition_element;
use crate::sigcore::{self, AlgorithmId};
use crate::transform::parse_transform_data_element;
use crate::xml::{parse, serialize};

#[derive(Debug, Error)]
pub enum RepoError {
    #[error("an entry with id {0:?} already exists")]
    DuplicateId(String),
    #[error("refusing to store: {0}")]
    SignatureInvalid(String),
    #[error("storage failure: {0}")]
    StorageFailure(String),
    #[error("no entry with id {0:?}")]
    NotFound(String),
    #[error("stored entry {0:?} is corrupt: {1}")]
    CorruptEntry(String, String),
    #[error("more than one definition targets namespace {0:?}")]
    AmbiguousNamespace(String),
}

impl From<std::io::Error> for RepoError {
    fn from(e: std::io::Error) -> Self {
        RepoError::StorageFailure(e.to_string())
    }
}

fn storage(msg: impl Into<String>) -> RepoError {
    RepoError::StorageFailure(msg.into())
}

/// What an entry is; part of its key, so one id may exist per kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RepoKind {
    Definition,
    Transform,
    Instance,
}

impl RepoKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RepoKind::Definition => "definition",
            RepoKind::Transform => "transform",
            RepoKind::Instance => "instance",
        }
    }
}

impl FromStr for RepoKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "definition" => Ok(RepoKind::Definition),
            "transform" => Ok(RepoKind::Transform),
            "instance" => Ok(RepoKind::Instance),
            other => Err(format!("unknown entry kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct IndexEntry {
    digest_hex: String,
    filename: String,
    namespace: String,
}

type Index = BTreeMap<(RepoKind, String), IndexEntry>;

/// Handle on a repository directory. Cheap to clone; all state is on disk.
#[derive(Debug, Clone)]
pub struct Repository {
    root: PathBuf,
}

const INDEX_FILE: &str = "index.tsv";
const LOCK_FILE: &str = "lock";
const OBJECTS_DIR: &str = "objects";

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Advisory lock guard; released when dropped.
struct Lock(#[allow(dead_code)] File);

impl Repository {
    /// Opens (creating if needed) the repository rooted at `root`.
    pub fn open(root: &Path) -> Result<Repository, RepoError> {
        fs::create_dir_all(root.join(OBJECTS_DIR))?;
        let repo = Repository { root: root.to_path_buf() };
        if !repo.index_path().exists() {
            // flock needs an existing file even before the first write.
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(repo.root.join(LOCK_FILE))?;
        }
        Ok(repo)
    }

    fn index_path(&self) -> PathBuf {
        self.root.join(INDEX_FILE)
    }

    fn lock(&self, exclusive: bool) -> Result<Lock, RepoError> {
        let file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(self.root.join(LOCK_FILE))?;
        let op = if exclusive { libc::LOCK_EX } else { libc::LOCK_SH };
        if unsafe { libc::flock(file.as_raw_fd(), op) } != 0 {
            return Err(storage("cannot lock the repository"));
        }
        Ok(Lock(file))
    }

    fn read_index(&self) -> Result<Index, RepoError> {
        let path = self.index_path();
        if !path.exists() {
            return Ok(Index::new());
        }
        let text = fs::read_to_string(&path)?;
        let mut index = Index::new();
        for line in text.lines() {
            let fields: Vec<&str> = line.split('\t').collect();
            let [kind, id, digest_hex, filename, namespace] = fields.as_slice() else {
                return Err(storage(format!("malformed index line {line:?}")));
            };
            let kind = RepoKind::from_str(kind).map_err(storage)?;
            index.insert(
                (kind, id.to_string()),
                IndexEntry {
                    digest_hex: digest_hex.to_string(),
                    filename: filename.to_string(),
                    namespace: namespace.to_string(),
                },
            );
        }
        Ok(index)
    }

    /// Rewrites the whole index atomically (temp file + rename).
    fn write_index(&self, index: &Index) -> Result<(), RepoError> {
        let mut out = String::new();
        for ((kind, id), entry) in index {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                kind.as_str(),
                id,
                entry.digest_hex,
                entry.filename,
                entry.namespace
            ));
        }
        let tmp = self.root.join(format!("{INDEX_FILE}.tmp-{}", std::process::id()));
        fs::write(&tmp, out)?;
        fs::rename(&tmp, self.index_path())?;
        Ok(())
    }

    /// Stores a signed document type definition; the id is its
    /// `documentTypeID`.
    pub fn store_definition(&self, edoc: &EDocument) -> Result<String, RepoError> {
        let def = parse_type_definition_element(&edoc.signed_content)
            .map_err(|e| storage(format!("content is not a document type definition: {e}")))?;
        self.store_entry(
            RepoKind::Definition,
            def.type_id.as_str(),
            &def.compiled_schema.target_namespace,
            edoc,
        )
    }

    /// Stores a signed transform; the id is its `transformDataID`.
    pub fn store_transform(&self, edoc: &EDocument) -> Result<String, RepoError> {
        let data = parse_transform_data_element(&edoc.signed_content)
            .map_err(|e| storage(format!("content is not transform data: {e}")))?;
        self.store_entry(RepoKind::Transform, &data.transform_id, "", edoc)
    }

    /// Stores a signed instance under a caller-assigned id.
    pub fn store_instance(&self, edoc: &EDocument, id: &str) -> Result<String, RepoError> {
        if id.trim().is_empty() {
            return Err(storage("instance id must not be empty"));
        }
        self.store_entry(RepoKind::Instance, id.trim(), "", edoc)
    }

    fn store_entry(
        &self,
        kind: RepoKind,
        id: &str,
        namespace: &str,
        edoc: &EDocument,
    ) -> Result<String, RepoError> {
        // Verification first: unsigned or invalid material never lands.
        let reports = edoc::verify_edoc(edoc).map_err(|e| RepoError::SignatureInvalid(e.to_string()))?;
        for report in &reports {
            if !report.signature_valid {
                return Err(RepoError::SignatureInvalid(
                    report
                        .failure_reason
                        .clone()
                        .unwrap_or_else(|| "signature does not verify".to_string()),
                ));
            }
        }

        let bytes = serialize(&edoc::emit_edoc(edoc));
        let digest = sigcore::digest(&bytes, &AlgorithmId::sha1())
            .map_err(|e| storage(e.to_string()))?;
        let filename = format!(
            "{}.xml",
            hex(&sigcore::digest(
                format!("{}\0{}", kind.as_str(), id).as_bytes(),
                &AlgorithmId::sha1(),
            )
            .map_err(|e| storage(e.to_string()))?
            .value)
        );

        let _lock = self.lock(true)?;
        let mut index = self.read_index()?;
        if index.contains_key(&(kind, id.to_string())) {
            return Err(RepoError::DuplicateId(id.to_string()));
        }

        // Bytes before index: a crash here leaves an orphan file, never a
        // dangling index entry.
        let objects = self.root.join(OBJECTS_DIR);
        let tmp = objects.join(format!(".tmp-{}", std::process::id()));
        let mut file = File::create(&tmp)?;
        file.write_all(&bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, objects.join(&filename))?;

        index.insert(
            (kind, id.to_string()),
            IndexEntry {
                digest_hex: hex(&digest.value),
                filename,
                namespace: namespace.to_string(),
            },
        );
        self.write_index(&index)?;
        Ok(id.to_string())
    }

    /// Loads an entry, checking the stored bytes against the indexed digest
    /// before parsing. Signature verification is the caller's step.
    pub fn fetch(&self, kind: RepoKind, id: &str) -> Result<EDocument, RepoError> {
        let _lock = self.lock(false)?;
        let index = self.read_index()?;
        let entry = index
            .get(&(kind, id.to_string()))
            .ok_or_else(|| RepoError::NotFound(id.to_string()))?;
        self.load_entry(id, entry)
    }

    fn load_entry(&self, id: &str, entry: &IndexEntry) -> Result<EDocument, RepoError> {
        let corrupt = |msg: String| RepoError::CorruptEntry(id.to_string(), msg);
        let path = self.root.join(OBJECTS_DIR).join(&entry.filename);
        let bytes = fs::read(&path).map_err(|e| corrupt(e.to_string()))?;
        let digest = sigcore::digest(&bytes, &AlgorithmId::sha1())
            .map_err(|e| corrupt(e.to_string()))?;
        if hex(&digest.value) != entry.digest_hex {
            return Err(corrupt("stored bytes do not match the indexed digest".into()));
        }
        let doc = parse(&bytes).map_err(|e| corrupt(e.to_string()))?;
        edoc::parse_edoc(&doc).map_err(|e| corrupt(e.to_string()))
    }

    /// The signed definition whose schema targets `namespace_uri` — how a
    /// verifier resolves an instance to its document type.
    pub fn find_definition_by_namespace(&self, namespace_uri: &str) -> Result<EDocument, RepoError> {
        let _lock = self.lock(false)?;
        let index = self.read_index()?;
        let mut matches = index
            .iter()
            .filter(|((kind, _), entry)| {
                *kind == RepoKind::Definition && entry.namespace == namespace_uri
            });
        let ((_, id), entry) = matches
            .next()
            .ok_or_else(|| RepoError::NotFound(namespace_uri.to_string()))?;
        if matches.next().is_some() {
            return Err(RepoError::AmbiguousNamespace(namespace_uri.to_string()));
        }
        self.load_entry(id, entry)
    }

    /// All entries of one kind as (id, content digest hex), sorted by id.
    pub fn list(&self, kind: RepoKind) -> Result<Vec<(String, String)>, RepoError> {
        let _lock = self.lock(false)?;
        let index = self.read_index()?;
        Ok(index
            .iter()
            .filter(|((k, _), _)| *k == kind)
            .map(|((_, id), entry)| (id.clone(), entry.digest_hex.clone()))
            .collect())
    }

    /// Deletes object files the index does not reference (leftovers from
    /// interrupted stores). Returns the removed file names.
    pub fn sweep(&self) -> Result<Vec<String>, RepoError> {
        let _lock = self.lock(true)?;
        let index = self.read_index()?;
        let referenced: Vec<&str> = index.values().map(|e| e.filename.as_str()).collect();
        let mut removed = Vec::new();
        for dirent in fs::read_dir(self.root.join(OBJECTS_DIR))? {
            let dirent = dirent?;
            let name = dirent.file_name().to_string_lossy().to_string();
            if !referenced.contains(&name.as_str()) {
                fs::remove_file(dirent.path())?;
                removed.push(name);
            }
        }
        removed.sort();
        Ok(removed)
    }
}
