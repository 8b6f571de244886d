//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 internal error. Failures also print one JSON line on stderr.

use std::fs;
use std::io::{self, BufReader, Write};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, CommandFactory, Parser, Subcommand};
use log::info;
use serde::Deserialize;

use crate::corpus::{LetterFrequencyTable, Lexicon, PhraseSet};
use crate::decoder::{Decoder, SpatialModel, DEFAULT_PAGE_SIZE};
use crate::error::{Error, Result};
use crate::geometry::{Keyboard, NormalizedPosition, Posture};
use crate::input::{Strategy, StrategyConfig};
use crate::layout::cluster::{fit_cluster_layouts, ClusterFile, MAX_CLUSTER_KEYS, MIN_CLUSTER_KEYS};
use crate::layout::enumerate::{layout_count, LayoutEnumerator};
use crate::layout::gmm::GmmParams;
use crate::layout::scoring::{
    joint_and_final_scores, parse_score_records, select_keyboard, ScoreTable, SelectionPolicy,
};
use crate::layout::sweep::{run_sweep, CandidateSet, SweepConfig, SweepControl, MAX_LETTER_KEYS, MIN_LETTER_KEYS};
use crate::service::{resolve_addr, Registry, Server};
use crate::session::{compute_metrics, read_log, write_log, DecodeMode, Mode, SessionConfig};
use crate::simulator::{compare_table, draw_phrases, monte_carlo_compare, simulate_session, Contender, CorrectionPolicy, TypistModel};
use crate::taps::{min_max_normalize, positions, read_taps, RawTap, TapSample};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ankle-keys", version, about = "Ambiguous radial keyboard toolkit")]
pub struct Cli {
    /// TOML file supplying flags; a `[command]` table applies to that command.
    /// Flags given on the command line win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a frequency lexicon and print its letter frequencies.
    #[command(args_override_self = true)]
    LexiconCheck(LexiconCheckArgs),
    /// Count or list contiguous letter layouts.
    #[command(args_override_self = true)]
    Enumerate(EnumerateArgs),
    /// Sweep all letter layouts and keep the best by disambiguation score.
    #[command(args_override_self = true)]
    Disambiguate(DisambiguateArgs),
    /// Fit per-posture cluster layouts to tap positions.
    #[command(args_override_self = true)]
    Cluster(ClusterArgs),
    /// Score candidate letter layouts against cluster layouts.
    #[command(args_override_self = true)]
    Score(ScoreArgs),
    /// Pick the final keyboards from a score table.
    #[command(args_override_self = true)]
    Select(SelectArgs),
    /// Decode a key sequence or tap positions into candidate words.
    #[command(args_override_self = true)]
    Decode(DecodeArgs),
    /// Run the synthetic typist.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Compute text-entry metrics from a session log.
    #[command(args_override_self = true)]
    Metrics(MetricsArgs),
    /// Serve live sessions over TCP.
    #[command(args_override_self = true)]
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct LexiconCheckArgs {
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Keep only the N most frequent words.
    #[arg(long, value_name = "N")]
    pub lexicon_top: Option<usize>,
    /// Write the letter-frequency table here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    #[arg(long, conflicts_with_all = ["k_min", "k_max"])]
    pub k: Option<usize>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Print the number of layouts only.
    #[arg(long)]
    pub count_only: bool,
    /// Stop listing after this many layouts.
    #[arg(long)]
    pub limit: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DisambiguateArgs {
    #[arg(long)]
    pub lexicon: PathBuf,
    #[arg(long, value_name = "N")]
    pub lexicon_top: Option<usize>,
    #[arg(long, default_value_t = MIN_LETTER_KEYS)]
    pub k_min: usize,
    #[arg(long, default_value_t = MAX_LETTER_KEYS)]
    pub k_max: usize,
    /// Candidates kept per letter-key count.
    #[arg(long, default_value_t = 100)]
    pub per_k: usize,
    /// A word succeeds when it ranks within this many candidates.
    #[arg(long, default_value_t = 3)]
    pub top_n: usize,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    pub checkpoint_every: u64,
    /// Continue from the checkpoint file.
    #[arg(long, requires = "checkpoint")]
    pub resume: bool,
    /// Stop after this many checkpoint blocks (the run can be resumed).
    #[arg(long)]
    pub max_blocks: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// CSV with header participant,posture,letter,normalized_position.
    #[arg(long)]
    pub taps: PathBuf,
    /// Treat the position column as raw angles and min-max normalize per participant and posture.
    #[arg(long)]
    pub raw: bool,
    /// standing, sitting or both.
    #[arg(long, default_value = "both")]
    pub posture: String,
    #[arg(long, default_value_t = MIN_CLUSTER_KEYS)]
    pub n_min: usize,
    #[arg(long, default_value_t = MAX_CLUSTER_KEYS)]
    pub n_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub n_init: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long)]
    pub clusters: PathBuf,
    #[arg(long)]
    pub taps: PathBuf,
    #[arg(long)]
    pub raw: bool,
    /// Letter frequencies from this lexicon...
    #[arg(long, required_unless_present = "letter_freq")]
    pub lexicon: Option<PathBuf>,
    /// ...or from a `letter\tweight` table.
    #[arg(long, conflicts_with = "lexicon")]
    pub letter_freq: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-key-count summary table.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long)]
    pub clusters: PathBuf,
    /// Total key count including space.
    #[arg(long, conflicts_with = "knee")]
    pub keys: Option<usize>,
    /// Choose the key count at the bend of the spatial-score curve.
    #[arg(long)]
    pub knee: bool,
    /// Directory for keyboard-standing.toml and keyboard-sitting.toml.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub keyboard: PathBuf,
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Comma-separated key indices.
    #[arg(long, conflicts_with_all = ["positions", "word"])]
    pub keys: Option<String>,
    /// Comma-separated normalized tap positions.
    #[arg(long, conflicts_with = "word")]
    pub positions: Option<String>,
    /// Decode the key signature of this word.
    #[arg(long)]
    pub word: Option<String>,
    /// `key_index\tcenter\tsigma` rows overriding the keyboard's dispersions.
    #[arg(long)]
    pub spatial: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub max_out: usize,
    #[arg(long, default_value_t = DEFAULT_PAGE_SIZE)]
    pub page_size: usize,
    /// Print only this page.
    #[arg(long)]
    pub page: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML simulation spec (keyboard, lexicon, phrases, typist, seeds).
    #[arg(long)]
    pub spec: PathBuf,
    /// Session log of the first seed.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub log: PathBuf,
    /// Check logged phrases against this phrase set.
    #[arg(long)]
    pub phrases: Option<PathBuf>,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub keyboard: PathBuf,
    #[arg(long)]
    pub lexicon: PathBuf,
    #[arg(long)]
    pub phrases: PathBuf,
    #[arg(long)]
    pub spatial: Option<PathBuf>,
    /// Listen address; defaults to $ANKLE_KEYS_ADDR, then 127.0.0.1:7878.
    #[arg(long)]
    pub addr: Option<String>,
    #[arg(long, default_value = "visual")]
    pub mode: String,
    /// UPStand, UPSit, BPStand or BPSit; defaults by keyboard posture.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long, default_value = "exact")]
    pub decode_mode: String,
    #[arg(long, default_value_t = DEFAULT_PAGE_SIZE)]
    pub page_size: usize,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).map_err(|e| Error::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            io::stdout().write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

fn load_lexicon(path: &Path, top: Option<usize>) -> Result<Lexicon> {
    let lex = Lexicon::load(open(path)?)?;
    Ok(match top {
        Some(n) => lex.truncated(n),
        None => lex,
    })
}

fn load_keyboard(path: &Path) -> Result<Keyboard> {
    Keyboard::from_toml_str(&read_text(path)?)
}

fn load_taps(path: &Path, raw: bool) -> Result<Vec<TapSample>> {
    if !raw {
        return read_taps(open(path)?);
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(open(path)?);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(i + 2, e.to_string()))?;
        if rec.len() != 4 {
            return Err(Error::parse(i + 2, "expected 4 columns"));
        }
        rows.push(RawTap {
            participant: rec[0].to_string(),
            posture: rec[1].parse()?,
            target: rec[2].parse()?,
            value: rec[3]
                .trim()
                .parse()
                .map_err(|_| Error::parse(i + 2, format!("bad number {:?}", &rec[3])))?,
        });
    }
    min_max_normalize(&rows)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Input(format!("bad {what} {x:?}"))))
        .collect()
}

fn postures(arg: &str) -> Result<Vec<Posture>> {
    if arg.eq_ignore_ascii_case("both") {
        Ok(Posture::ALL.to_vec())
    } else {
        Ok(vec![arg.parse()?])
    }
}

fn shell_quote(a: &str) -> String {
    if !a.is_empty() && a.chars().all(|c| c.is_ascii_alphanumeric() || "-_./=:,".contains(c)) {
        a.to_string()
    } else {
        format!("'{}'", a.replace('\'', r"'\''"))
    }
}

struct Ctx {
    argv: Vec<String>,
}

impl Ctx {
    fn header(&self, seed: Option<u64>) -> String {
        let cmd: Vec<String> = self.argv.iter().map(|a| shell_quote(a)).collect();
        format!(
            "# ankle-keys {}\n# command: {}\n# seed: {}\n",
            env!("CARGO_PKG_VERSION"),
            cmd.join(" "),
            seed.map_or("none".to_string(), |s| s.to_string())
        )
    }
}

fn lexicon_check(ctx: &Ctx, a: LexiconCheckArgs) -> Result<()> {
    let lex = load_lexicon(&a.lexicon, a.lexicon_top)?;
    let freq = LetterFrequencyTable::from_lexicon(&lex)?;
    let total: f64 = lex.entries().iter().map(|e| e.frequency).sum();
    let longest = lex.entries().iter().map(|e| e.word.len()).max().unwrap_or(0);
    println!("words\t{}", lex.len());
    println!("total_frequency\t{total}");
    println!("longest_word\t{longest}");
    let table: String = (0..26)
        .map(|i| format!("{}\t{}\n", (b'a' + i as u8) as char, freq.by_index(i)))
        .collect();
    match a.out {
        Some(p) => write_out(Some(&p), &(ctx.header(None) + &table)),
        None => write_out(None, &table),
    }
}

fn enumerate(ctx: &Ctx, a: EnumerateArgs) -> Result<()> {
    let (k_min, k_max) = match (a.k, a.k_min, a.k_max) {
        (Some(k), _, _) => (k, k),
        (None, Some(lo), Some(hi)) => (lo, hi),
        (None, None, None) => (MIN_LETTER_KEYS, MAX_LETTER_KEYS),
        _ => return Err(Error::Input("give --k, or both --k-min and --k-max".into())),
    };
    if k_min > k_max {
        return Err(Error::Input(format!("--k-min {k_min} exceeds --k-max {k_max}")));
    }
    let mut total = 0u64;
    for k in k_min..=k_max {
        let n = layout_count(k)?;
        info!("k={k}: {n} layouts");
        total += n;
    }
    if a.count_only {
        return write_out(a.out.as_deref(), &format!("{total}\n"));
    }
    let limit = a.limit.unwrap_or(u64::MAX);
    let mut out = ctx.header(None);
    out.push_str("k\tj\tlayout\n");
    let mut written = 0;
    'outer: for k in k_min..=k_max {
        for (j, layout) in LayoutEnumerator::new(k)?.enumerate() {
            if written >= limit {
                break 'outer;
            }
            out.push_str(&format!("{k}\t{j}\t{layout}\n"));
            written += 1;
        }
    }
    write_out(a.out.as_deref(), &out)
}

fn disambiguate(ctx: &Ctx, a: DisambiguateArgs) -> Result<()> {
    let lex = load_lexicon(&a.lexicon, a.lexicon_top)?;
    let cfg = SweepConfig {
        k_min: a.k_min,
        k_max: a.k_max,
        per_k: a.per_k,
        top_n: a.top_n,
        workers: a.workers,
        checkpoint_every: a.checkpoint_every,
    };
    let control = SweepControl {
        checkpoint: a.checkpoint.as_deref(),
        resume: a.resume,
        max_blocks: a.max_blocks,
    };
    match run_sweep(&cfg, &lex, &control)? {
        Some(set) => write_out(a.out.as_deref(), &set.to_tsv(&ctx.header(None))),
        None => {
            eprintln!("sweep paused; rerun with --resume to continue");
            Ok(())
        }
    }
}

fn cluster(ctx: &Ctx, a: ClusterArgs) -> Result<()> {
    let taps = load_taps(&a.taps, a.raw)?;
    let params = GmmParams {
        seed: a.seed,
        n_init: a.n_init,
        ..GmmParams::default()
    };
    let mut all = Vec::new();
    for p in postures(&a.posture)? {
        let xs = positions(&taps, p);
        if xs.is_empty() {
            return Err(Error::Input(format!("no {p} taps in {}", a.taps.display())));
        }
        all.extend(fit_cluster_layouts(&xs, p, a.n_min, a.n_max, &params)?);
    }
    let file = ClusterFile::from_candidates(&all);
    write_out(a.out.as_deref(), &(ctx.header(Some(a.seed)) + &file.to_toml_string()))
}

fn score(ctx: &Ctx, a: ScoreArgs) -> Result<()> {
    let cands = CandidateSet::from_tsv(&read_text(&a.candidates)?)?;
    let clusters = ClusterFile::from_toml_str(&read_text(&a.clusters)?)?.layouts()?;
    let taps = load_taps(&a.taps, a.raw)?;
    let freq = match (&a.lexicon, &a.letter_freq) {
        (_, Some(p)) => LetterFrequencyTable::load(open(p)?)?,
        (Some(p), None) => LetterFrequencyTable::from_lexicon(&load_lexicon(p, None)?)?,
        (None, None) => unreachable!("clap requires one"),
    };
    let table = joint_and_final_scores(&cands, &clusters, &taps, &freq)?;
    let header = ctx.header(None);
    if let Some(p) = &a.summary {
        write_out(Some(p), &(header.clone() + &table.summary_tsv()))?;
    }
    write_out(a.out.as_deref(), &table.to_tsv(&header))
}

fn select(ctx: &Ctx, a: SelectArgs) -> Result<()> {
    let records = parse_score_records(&read_text(&a.scores)?)?;
    let cands = CandidateSet::from_tsv(&read_text(&a.candidates)?)?;
    let clusters = ClusterFile::from_toml_str(&read_text(&a.clusters)?)?.layouts()?;
    let table = ScoreTable {
        records,
        clusters: clusters.into_iter().map(|c| ((c.posture, c.n_keys()), c)).collect(),
        layouts: cands.iter().map(|c| ((c.k, c.index), c.layout.clone())).collect(),
    };
    let policy = match (a.keys, a.knee) {
        (Some(n), _) => SelectionPolicy::ExplicitKeys(n),
        (None, _) => SelectionPolicy::Knee,
    };
    let sel = select_keyboard(&table, policy)?;
    fs::create_dir_all(&a.out_dir)?;
    let header = ctx.header(None);
    for (name, kb) in [("keyboard-standing.toml", &sel.standing), ("keyboard-sitting.toml", &sel.sitting)] {
        write_out(Some(&a.out_dir.join(name)), &(header.clone() + &kb.to_toml_string()))?;
    }
    let r = sel.record;
    println!("keys\t{}\nletter_keys\t{}\nj\t{}\nL\t{}\nS_joint\t{}\nF\t{}\nlayout\t{}", r.n_keys, r.k_letters, r.j, r.l, r.s_joint, r.f, sel.standing.letter_layout());
    Ok(())
}

fn decode(a: DecodeArgs) -> Result<()> {
    let kb = load_keyboard(&a.keyboard)?;
    let lex = load_lexicon(&a.lexicon, None)?;
    let sm = match &a.spatial {
        Some(p) => SpatialModel::load(kb.posture(), open(p)?)?,
        None => SpatialModel::from_keyboard(&kb)?,
    };
    let dec = Decoder::new(kb, sm, lex)?.with_page_size(a.page_size)?;
    let list = match (&a.keys, &a.positions, &a.word) {
        (Some(k), _, _) => dec.exact(&parse_list(k, "key index")?, a.max_out)?,
        (_, Some(p), _) => {
            let xs: Vec<f64> = parse_list(p, "position")?;
            let xs = xs.into_iter().map(NormalizedPosition::new).collect::<Result<Vec<_>>>()?;
            dec.bayes(&xs, a.max_out)?
        }
        (_, _, Some(w)) => dec.exact(&dec.keyboard().signature(w)?, a.max_out)?,
        _ => return Err(Error::Input("give --keys, --positions or --word".into())),
    };
    let shown = match a.page {
        Some(p) => list.page(p),
        None => &list.candidates[..],
    };
    let mut out = String::from("rank\tword\tscore\n");
    for c in shown {
        out.push_str(&format!("{}\t{}\t{:.12}\n", c.rank, c.word, c.score));
    }
    write_out(None, &out)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationSpec {
    keyboard: PathBuf,
    lexicon: PathBuf,
    phrases: PathBuf,
    spatial: Option<PathBuf>,
    sigma: Option<f64>,
    #[serde(default = "default_inter_tap")]
    inter_tap_ms: f64,
    #[serde(default)]
    jitter_ms: f64,
    #[serde(default = "default_policy")]
    policy: String,
    #[serde(default = "default_retries")]
    max_retries: u32,
    max_candidates_scanned: Option<usize>,
    #[serde(default = "default_seeds")]
    seeds: Vec<u64>,
    #[serde(default = "default_n_phrases")]
    n_phrases: usize,
    #[serde(default = "default_decode_mode")]
    decode_mode: String,
    #[serde(default = "default_mode")]
    mode: String,
}

fn default_inter_tap() -> f64 {
    400.0
}
fn default_policy() -> String {
    "never".into()
}
fn default_retries() -> u32 {
    3
}
fn default_seeds() -> Vec<u64> {
    vec![1]
}
fn default_n_phrases() -> usize {
    10
}
fn default_decode_mode() -> String {
    "exact".into()
}
fn default_mode() -> String {
    "visual".into()
}

fn default_strategy(posture: Posture) -> Strategy {
    match posture {
        Posture::Standing => Strategy::UPStand,
        Posture::Sitting => Strategy::BPSit,
    }
}

fn simulate(ctx: &Ctx, a: SimulateArgs) -> Result<()> {
    let spec: SimulationSpec =
        toml::from_str(&read_text(&a.spec)?).map_err(|e| Error::Config(format!("simulation spec: {e}")))?;
    let base = a.spec.parent().unwrap_or(Path::new("."));
    let kb = load_keyboard(&base.join(&spec.keyboard))?;
    let lex = load_lexicon(&base.join(&spec.lexicon), None)?;
    let phrases = PhraseSet::load(open(&base.join(&spec.phrases))?)?;
    let sm = match &spec.spatial {
        Some(p) => SpatialModel::load(kb.posture(), open(&base.join(p))?)?,
        None => SpatialModel::from_keyboard(&kb)?,
    };
    let first_seed = *spec.seeds.first().ok_or_else(|| Error::Config("seeds must not be empty".into()))?;
    let mut model = match spec.sigma {
        Some(s) => TypistModel::with_sigma(&kb, s, first_seed),
        None => TypistModel::from_spatial(&sm, first_seed),
    };
    model.inter_tap_ms = spec.inter_tap_ms;
    model.jitter_ms = spec.jitter_ms;
    model.max_candidates_scanned = spec.max_candidates_scanned;
    model.correction = match spec.policy.as_str() {
        "never" => CorrectionPolicy::Never,
        "always" => CorrectionPolicy::Always {
            max_retries: spec.max_retries,
        },
        other => return Err(Error::Config(format!("unknown policy {other:?}"))),
    };
    let cfg = SessionConfig {
        mode: spec.mode.parse::<Mode>()?,
        decode_mode: spec.decode_mode.parse::<DecodeMode>()?,
        strategy: StrategyConfig::new(default_strategy(kb.posture())),
        ..SessionConfig::default()
    };
    let decoder = Arc::new(Decoder::new(kb, sm, lex)?);
    let contender = Contender {
        label: a.spec.display().to_string(),
        model: model.clone(),
        decoder: decoder.clone(),
        config: cfg,
    };
    let report = monte_carlo_compare(&[contender], &phrases, spec.n_phrases, &spec.seeds)?;
    let header = ctx.header(Some(first_seed));
    if let Some(p) = &a.log {
        let draw = draw_phrases(&phrases, spec.n_phrases, first_seed)?;
        let run = simulate_session(&model, decoder, &draw, cfg)?;
        let mut buf = header.clone().into_bytes();
        write_log(&mut buf, &run.log)?;
        fs::write(p, buf)?;
    }
    write_out(a.out.as_deref(), &(header + &compare_table(&report)))
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let log = read_log(open(&a.log)?)?;
    let set = match &a.phrases {
        Some(p) => Some(PhraseSet::load(open(p)?)?),
        None => None,
    };
    let report = compute_metrics(&log, set.as_ref())?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print!("{}", report.summary_table());
        println!("WPM {:.2}\nTER {:.2}%\nNCER {:.2}%", report.wpm, 100.0 * report.ter, 100.0 * report.ncer);
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let kb = load_keyboard(&a.keyboard)?;
    let lex = load_lexicon(&a.lexicon, None)?;
    let phrases = PhraseSet::load(open(&a.phrases)?)?;
    let sm = match &a.spatial {
        Some(p) => SpatialModel::load(kb.posture(), open(p)?)?,
        None => SpatialModel::from_keyboard(&kb)?,
    };
    let strategy = match &a.strategy {
        Some(s) => s.parse()?,
        None => default_strategy(kb.posture()),
    };
    let cfg = SessionConfig {
        mode: a.mode.parse()?,
        decode_mode: a.decode_mode.parse()?,
        strategy: StrategyConfig::new(strategy),
        ..SessionConfig::default()
    };
    let decoder = Arc::new(Decoder::new(kb, sm, lex)?.with_page_size(a.page_size)?);
    let addr = resolve_addr(a.addr.as_deref());
    let server = Server::bind(addr.as_str(), Registry::new(decoder, phrases, cfg))?;
    eprintln!("listening on {}", server.local_addr()?);
    server.run()
}

fn toml_value_arg(v: &toml::Value) -> Option<String> {
    match v {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Array(a) => Some(a.iter().filter_map(toml_value_arg).collect::<Vec<_>>().join(",")),
        _ => None,
    }
}

/// Splices flags from `--config` in front of the command-line flags of the
/// chosen subcommand so that later (command-line) occurrences win.
pub fn expand_config(argv: &[String]) -> Result<Vec<String>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.iter().cloned();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or_else(|| Error::Config("--config needs a path".into()))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let table: toml::Table = read_text(Path::new(&path))?
        .parse()
        .map_err(|e| Error::Config(format!("{path}: {e}")))?;
    let root = Cli::command();
    let Some((pos, sub)) = rest
        .iter()
        .enumerate()
        .skip(1)
        .find_map(|(i, a)| root.find_subcommand(a).map(|s| (i, s)))
    else {
        return Ok(rest);
    };
    let known = |key: &str| sub.get_arguments().any(|arg| arg.get_long() == Some(key));
    let mut injected = Vec::new();
    let mut push = |key: &str, v: &toml::Value| -> Result<()> {
        if !known(key) {
            return Err(Error::Config(format!("{path}: `{}` has no flag --{key}", sub.get_name())));
        }
        match v {
            toml::Value::Boolean(true) => injected.push(format!("--{key}")),
            toml::Value::Boolean(false) => {}
            other => {
                let s = toml_value_arg(other).ok_or_else(|| Error::Config(format!("{path}: unsupported value for {key}")))?;
                injected.push(format!("--{key}"));
                injected.push(s);
            }
        }
        Ok(())
    };
    for (k, v) in &table {
        match v {
            toml::Value::Table(t) if k == sub.get_name() => {
                for (k2, v2) in t {
                    push(k2, v2)?;
                }
            }
            toml::Value::Table(_) => {}
            _ if known(k) => push(k, v)?,
            _ => {}
        }
    }
    rest.splice(pos + 1..pos + 1, injected);
    Ok(rest)
}

fn dispatch(ctx: &Ctx, cli: Cli) -> Result<()> {
    match cli.command {
        Command::LexiconCheck(a) => lexicon_check(ctx, a),
        Command::Enumerate(a) => enumerate(ctx, a),
        Command::Disambiguate(a) => disambiguate(ctx, a),
        Command::Cluster(a) => cluster(ctx, a),
        Command::Score(a) => score(ctx, a),
        Command::Select(a) => select(ctx, a),
        Command::Decode(a) => decode(a),
        Command::Simulate(a) => simulate(ctx, a),
        Command::Metrics(a) => metrics(a),
        Command::Serve(a) => serve(a),
    }
}

fn error_line(kind: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "error": { "kind": kind, "message": message } }));
}

/// Runs the tool and returns the process exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let expanded = match expand_config(&argv) {
        Ok(a) => a,
        Err(e) => {
            error_line(e.kind(), &e.to_string());
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(&expanded) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            if code != EXIT_OK {
                error_line("usage", e.kind().as_str().unwrap_or("invalid arguments"));
            }
            return code;
        }
    };
    let ctx = Ctx { argv };
    match panic::catch_unwind(AssertUnwindSafe(|| dispatch(&ctx, cli))) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(e)) => {
            error_line(e.kind(), &e.to_string());
            EXIT_DATA
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            error_line("internal", &msg);
            EXIT_INTERNAL
        }
    }
}
