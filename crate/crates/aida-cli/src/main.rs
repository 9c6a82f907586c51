//! `aida` — author, sign, store, verify, and render signed self-describing
//! documents.
//!
//! The tool drives the whole document lifecycle against a file-backed
//! repository: generate keys (`keygen`), compile a generic type definition
//! into a full document type (`compile`), wrap and sign material (`sign`),
//! store and retrieve signed envelopes (`store`, `fetch`, `list`), build
//! signed instances from field values (`instantiate`), run the four-step
//! verification pipeline (`verify`), and render an instance through its
//! signed stylesheet (`render`).
//!
//! Exit code 0 means the operation fully succeeded; diagnostics go to
//! stderr, primary output to `--out` or stdout.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_core::OsRng;

use aida_core::edoc::{
    self, make_instance, parse_edoc, pipeline_verify, signed_content_digest,
    signed_properties_view, verify_edoc, wrap_and_sign, PipelineReport, SignedProperties,
    UnsignedProperties,
};
use aida_core::ns;
use aida_core::repository::{RepoKind, Repository};
use aida_core::schema::{
    compile, parse_generic, parse_type_definition, parse_type_definition_element,
    emit_type_definition, DocumentTypeId,
};
use aida_core::sigcore::{cert, generate_keypair, paired_digest_algorithm, AlgorithmId, KeyPair};
use aida_core::transform::{
    apply, emit_transform_data_element, parse_transform_data, parse_transform_data_element,
    TransformData,
};
use aida_core::xml::{parse, serialize, XmlDocument};
use aida_core::xmldsig::KeyInfo;

#[derive(Parser)]
#[command(name = "aida", version, about = "Signed self-describing document toolkit")]
struct Cli {
    /// Repository directory (created on first use).
    #[arg(long, global = true, default_value = "repo")]
    repo: PathBuf,

    /// Signing key: PKCS#8 PEM private key.
    #[arg(long, global = true)]
    key: Option<PathBuf>,

    /// Signer certificate (PEM), carried in the signature's KeyInfo.
    /// Without it the bare public key is embedded instead.
    #[arg(long, global = true)]
    cert: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    RsaSha1,
    RsaSha256,
}

impl Algorithm {
    fn id(self) -> AlgorithmId {
        match self {
            Algorithm::RsaSha1 => AlgorithmId::rsa_sha1(),
            Algorithm::RsaSha256 => AlgorithmId::rsa_sha256(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Definition,
    Transform,
    Instance,
}

impl Kind {
    fn repo(self) -> RepoKind {
        match self {
            Kind::Definition => RepoKind::Definition,
            Kind::Transform => RepoKind::Transform,
            Kind::Instance => RepoKind::Instance,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    /// Human-readable table.
    Text,
    /// One tab-separated record per step.
    Lines,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an RSA signing key and an optional self-signed certificate.
    Keygen {
        /// Private key output path (PKCS#8 PEM).
        #[arg(long)]
        out: PathBuf,
        /// Certificate output path (PEM).
        #[arg(long)]
        cert_out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Algorithm::RsaSha1)]
        algorithm: Algorithm,
        /// RSA modulus size in bits.
        #[arg(long, default_value_t = 2048)]
        bits: usize,
        /// Certificate subject (common name).
        #[arg(long, default_value = "aida signer")]
        subject: String,
        /// Derive the key deterministically from a seed (testing only).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compile a generic type definition into a documentTypeData document.
    Compile {
        /// Generic definition XML file.
        #[arg(long)]
        generic: PathBuf,
        /// Unique document type id, e.g. aida://www.polito.it/tax.
        #[arg(long)]
        type_id: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Wrap content in a signed eDocument envelope.
    Sign {
        /// Content file: a documentTypeData, a transformData or bare
        /// stylesheet, or an instance subtree, per --kind.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, value_enum, default_value_t = Algorithm::RsaSha1)]
        algorithm: Algorithm,
        /// Transform id, when signing a bare stylesheet.
        #[arg(long)]
        transform_id: Option<String>,
        /// Target document type id, when signing a bare stylesheet.
        #[arg(long)]
        type_id: Option<String>,
        /// Stylesheet language, when signing a bare stylesheet.
        #[arg(long, default_value = "en")]
        language: String,
    },
    /// Verify and store a signed e-document in the repository.
    Store {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        /// Caller-assigned id (instances only; definitions and transforms
        /// carry their own).
        #[arg(long)]
        id: Option<String>,
    },
    /// Fetch a stored entry and write its e-document XML.
    Fetch {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        id: String,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List stored entries of one kind (id and content digest).
    List {
        #[arg(long, value_enum)]
        kind: Kind,
    },
    /// Build and sign an instance of a stored document type.
    Instantiate {
        /// Id of the definition in the repository.
        #[arg(long)]
        type_id: String,
        /// Values file: one `field=value` line per field.
        #[arg(long)]
        values: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Transform id to record in the signed properties.
        #[arg(long)]
        transform_id: Option<String>,
        #[arg(long, value_enum, default_value_t = Algorithm::RsaSha1)]
        algorithm: Algorithm,
    },
    /// Run the four-step verification pipeline on a signed instance.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        report_format: ReportFormat,
    },
    /// Verify the instance's transform and render it to MHTML.
    Render {
        #[arg(long = "in")]
        input: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Keygen { out, cert_out, algorithm, bits, subject, seed } => {
            cmd_keygen(out, cert_out.as_deref(), *algorithm, *bits, subject, *seed)?
        }
        Command::Compile { generic, type_id, out } => cmd_compile(generic, type_id, out)?,
        Command::Sign { input, out, kind, algorithm, transform_id, type_id, language } => {
            cmd_sign(&cli, input, out, *kind, *algorithm, transform_id.as_deref(), type_id.as_deref(), language)?
        }
        Command::Store { input, kind, id } => cmd_store(&cli, input, *kind, id.as_deref())?,
        Command::Fetch { kind, id, out } => cmd_fetch(&cli, *kind, id, out.as_deref())?,
        Command::List { kind } => cmd_list(&cli, *kind)?,
        Command::Instantiate { type_id, values, out, transform_id, algorithm } => {
            cmd_instantiate(&cli, type_id, values, out, transform_id.as_deref(), *algorithm)?
        }
        Command::Verify { input, report_format } => {
            return cmd_verify(&cli, input, *report_format);
        }
        Command::Render { input, out } => cmd_render(&cli, input, out.as_deref())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn read_xml(path: &Path) -> Result<XmlDocument> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse(&bytes).with_context(|| format!("{} is not a well-formed document", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_file(p, bytes),
        None => {
            std::io::stdout().write_all(bytes).context("cannot write to stdout")?;
            Ok(())
        }
    }
}

fn open_repo(cli: &Cli) -> Result<Repository> {
    Repository::open(&cli.repo)
        .with_context(|| format!("cannot open repository {}", cli.repo.display()))
}

fn load_key(cli: &Cli, algorithm: Algorithm) -> Result<KeyPair> {
    let path = cli
        .key
        .as_ref()
        .ok_or_else(|| anyhow!("--key is required for this command"))?;
    let pem = fs::read_to_string(path)
        .with_context(|| format!("cannot read key {}", path.display()))?;
    KeyPair::from_private_pem(&pem, algorithm.id())
        .with_context(|| format!("{} is not a usable private key", path.display()))
}

fn load_key_info(cli: &Cli, key: &KeyPair) -> Result<KeyInfo> {
    let Some(path) = &cli.cert else {
        return Ok(KeyInfo::PublicKey(key.public_key.clone()));
    };
    let pem = fs::read_to_string(path)
        .with_context(|| format!("cannot read certificate {}", path.display()))?;
    let der = cert::cert_from_pem(&pem)
        .with_context(|| format!("{} is not a PEM certificate", path.display()))?;
    if cert::extract_public_key(&der)? != key.public_key {
        bail!("certificate {} does not match the signing key", path.display());
    }
    Ok(KeyInfo::Certificate(der))
}

fn cmd_keygen(
    out: &Path,
    cert_out: Option<&Path>,
    algorithm: Algorithm,
    bits: usize,
    subject: &str,
    seed: Option<u64>,
) -> Result<()> {
    let pair = match seed {
        Some(seed) => {
            generate_keypair(&algorithm.id(), bits, &mut ChaCha20Rng::seed_from_u64(seed))?
        }
        None => generate_keypair(&algorithm.id(), bits, &mut OsRng)?,
    };
    write_file(out, pair.to_private_pem()?.as_bytes())?;
    if let Some(cert_path) = cert_out {
        let der = cert::build_self_signed(&pair, subject)?;
        write_file(cert_path, cert::cert_to_pem(&der)?.as_bytes())?;
    }
    Ok(())
}

fn cmd_compile(generic_path: &Path, type_id: &str, out: &Path) -> Result<()> {
    let generic = parse_generic(&read_xml(generic_path)?)
        .with_context(|| format!("{} is not a generic type definition", generic_path.display()))?;
    let type_id = DocumentTypeId::new(type_id)?;
    let def = compile(generic, type_id);
    write_file(out, &serialize(&emit_type_definition(&def)))
}

#[allow(clippy::too_many_arguments)]
fn cmd_sign(
    cli: &Cli,
    input: &Path,
    out: &Path,
    kind: Kind,
    algorithm: Algorithm,
    transform_id: Option<&str>,
    type_id: Option<&str>,
    language: &str,
) -> Result<()> {
    let doc = read_xml(input)?;
    let content = match kind {
        Kind::Definition => {
            parse_type_definition(&doc)
                .with_context(|| format!("{} is not a documentTypeData document", input.display()))?;
            doc.root
        }
        Kind::Transform => {
            if doc.root.name.is(ns::XSL, "stylesheet") {
                // A bare stylesheet: wrap it in transformData metadata.
                let transform_id = transform_id
                    .ok_or_else(|| anyhow!("--transform-id is required to sign a bare stylesheet"))?;
                let type_id = type_id
                    .ok_or_else(|| anyhow!("--type-id is required to sign a bare stylesheet"))?;
                let data = TransformData::new(
                    transform_id,
                    DocumentTypeId::new(type_id)?,
                    language,
                    doc.root,
                )?;
                emit_transform_data_element(&data)
            } else {
                parse_transform_data(&doc)
                    .with_context(|| format!("{} is not a transformData document", input.display()))?;
                doc.root
            }
        }
        Kind::Instance => doc.root,
    };
    let key = load_key(cli, algorithm)?;
    let key_info = load_key_info(cli, &key)?;
    let edoc = wrap_and_sign(
        content,
        &key,
        key_info,
        &SignedProperties::none(),
        &UnsignedProperties::none(),
    )?;
    write_file(out, &serialize(&edoc::emit_edoc(&edoc)))
}

fn cmd_store(cli: &Cli, input: &Path, kind: Kind, id: Option<&str>) -> Result<()> {
    let edoc = parse_edoc(&read_xml(input)?)
        .with_context(|| format!("{} is not a signed e-document", input.display()))?;
    let repo = open_repo(cli)?;
    let stored = match kind {
        Kind::Definition => repo.store_definition(&edoc)?,
        Kind::Transform => repo.store_transform(&edoc)?,
        Kind::Instance => {
            let id = id.ok_or_else(|| anyhow!("--id is required to store an instance"))?;
            repo.store_instance(&edoc, id)?
        }
    };
    println!("{stored}");
    Ok(())
}

fn cmd_fetch(cli: &Cli, kind: Kind, id: &str, out: Option<&Path>) -> Result<()> {
    let edoc = open_repo(cli)?.fetch(kind.repo(), id)?;
    write_out(out, &serialize(&edoc::emit_edoc(&edoc)))
}

fn cmd_list(cli: &Cli, kind: Kind) -> Result<()> {
    for (id, digest) in open_repo(cli)?.list(kind.repo())? {
        println!("{id}\t{digest}");
    }
    Ok(())
}

/// One `field=value` per line; blank lines ignored, order free.
fn parse_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (field, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("values line {}: expected field=value", lineno + 1))?;
        values.push((field.trim().to_string(), value.to_string()));
    }
    Ok(values)
}

fn cmd_instantiate(
    cli: &Cli,
    type_id: &str,
    values_path: &Path,
    out: &Path,
    transform_id: Option<&str>,
    algorithm: Algorithm,
) -> Result<()> {
    let repo = open_repo(cli)?;
    let def_edoc = repo.fetch(RepoKind::Definition, type_id)?;
    let def = parse_type_definition_element(&def_edoc.signed_content)
        .context("stored definition does not parse")?;

    let text = fs::read_to_string(values_path)
        .with_context(|| format!("cannot read {}", values_path.display()))?;
    let instance = make_instance(&def, &parse_values(&text)?)?;

    let key = load_key(cli, algorithm)?;
    let key_info = load_key_info(cli, &key)?;
    let props = SignedProperties {
        transform_data_id: transform_id.map(str::to_string),
        document_hash: Some(signed_content_digest(
            &instance,
            &paired_digest_algorithm(&key.algorithm)?,
        )?),
    };
    let edoc = wrap_and_sign(instance, &key, key_info, &props, &UnsignedProperties::none())?;
    write_file(out, &serialize(&edoc::emit_edoc(&edoc)))
}

fn print_report(report: &PipelineReport, format: ReportFormat) {
    match format {
        ReportFormat::Text => {
            for step in &report.steps {
                println!(
                    "{:<28} {:<8} {}",
                    step.name,
                    step.outcome.as_str().to_uppercase(),
                    step.detail
                );
            }
            println!("overall: {}", if report.overall { "PASS" } else { "FAIL" });
        }
        ReportFormat::Lines => {
            for step in &report.steps {
                println!("{}\t{}\t{}", step.name, step.outcome, step.detail);
            }
            println!("overall\t{}", if report.overall { "pass" } else { "fail" });
        }
    }
}

fn cmd_verify(cli: &Cli, input: &Path, format: ReportFormat) -> Result<ExitCode> {
    let edoc = parse_edoc(&read_xml(input)?)
        .with_context(|| format!("{} is not a signed e-document", input.display()))?;
    let repo = open_repo(cli)?;
    let report = pipeline_verify(&edoc, &repo);
    print_report(&report, format);
    Ok(if report.overall {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_render(cli: &Cli, input: &Path, out: Option<&Path>) -> Result<()> {
    let edoc = parse_edoc(&read_xml(input)?)
        .with_context(|| format!("{} is not a signed e-document", input.display()))?;
    let transform_id = edoc
        .signatures
        .iter()
        .find_map(|sig| signed_properties_view(sig).ok().and_then(|p| p.transform_data_id))
        .ok_or_else(|| anyhow!("instance names no transform in its signed properties"))?;

    let repo = open_repo(cli)?;
    let transform_edoc = repo.fetch(RepoKind::Transform, &transform_id)?;

    // A transform that does not verify must never shape what the user sees.
    for report in verify_edoc(&transform_edoc)? {
        if !report.signature_valid {
            bail!(
                "stored transform {transform_id:?} fails verification: {}",
                report.failure_reason.unwrap_or_default()
            );
        }
    }

    let data = parse_transform_data_element(&transform_edoc.signed_content)
        .context("stored transform does not parse")?;
    let rendered = apply(&data.stylesheet, &edoc.signed_content)?;
    write_out(out, &serialize(&rendered))
}
