//! `cognite`: the headless pipeline from training modules to missions.

mod bridge;
mod manifest;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cognite::bots::{module_name, module_seed, run_bot, Policy, PolicyKind};
use cognite::centre::{CentreState, SkillPacket};
use cognite::rules::{induce, DistanceBucket, RuleBase, RuleContext};
use cognite::session::{Episode, ModuleSession};
use cognite::solver::{oracle_rulebase, solve, MissionConfig, ObjectMix, Outcome};
use cognite::transport::{fetch_base, Client, Server};
use cognite::world::{Alignment, EventKind, ObjectKind};
use manifest::RunManifest;

const DEFAULT_ADDR: &str = "127.0.0.1:7878";

#[derive(Parser, Debug)]
#[command(
    name = "cognite",
    version,
    about = "Distributed skill modules, a rule centre and the mission that uses them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a bot on one or more module objects and write their traces.
    Module(ModuleArgs),
    /// Turn trace files into a rule base.
    Induce(InduceArgs),
    /// Run the skill centre.
    Centre {
        #[command(subcommand)]
        command: CentreCommand,
    },
    /// Send a rule base to a centre as one packet.
    Submit(SubmitArgs),
    /// Rank rules for a context from a file or a centre.
    Query(QueryArgs),
    /// Run one mission with frozen rules.
    Solve(SolveArgs),
    /// Train all modules, pool them in a centre, then fly missions.
    Demo(DemoArgs),
    /// Serve live sessions over TCP and a browser socket.
    Play(PlayArgs),
    /// Repeat the run recorded in a manifest.
    Rerun { manifest: PathBuf },
}

#[derive(Subcommand, Debug)]
enum CentreCommand {
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
struct ModuleArgs {
    /// Object names (destroyer, sticker, power_supply, conveyor) or `all`.
    #[arg(long, value_delimiter = ',', required = true)]
    object: Vec<String>,
    #[arg(long, default_value = "egreedy")]
    policy: String,
    #[arg(long, default_value_t = 200)]
    episodes: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Bots to run at once; output order does not depend on it.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct InduceArgs {
    #[arg(long = "in", value_delimiter = ',', required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    min_support: Option<u64>,
    #[arg(long)]
    min_confidence: Option<f64>,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, env = "COGNITE_CENTRE_ADDR", default_value = DEFAULT_ADDR)]
    addr: String,
    /// Packet log; the centre is rebuilt from it and appends to it.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SubmitArgs {
    #[arg(long)]
    rules: PathBuf,
    #[arg(long, default_value = "cli")]
    module_id: String,
    #[arg(long, default_value_t = 0)]
    shape_id: u8,
    #[arg(long, default_value_t = 0)]
    first_episode: u32,
    #[arg(long, default_value_t = 0)]
    episodes: u32,
    #[arg(long, env = "COGNITE_CENTRE_ADDR", default_value = DEFAULT_ADDR)]
    addr: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DistanceArg {
    Adjacent,
    Near,
    Far,
    None,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlignmentArg {
    AxisH,
    AxisV,
    Diagonal,
    None,
}

#[derive(Args, Debug)]
struct QueryArgs {
    /// Shape id of the nearest object; omit for an empty context.
    #[arg(long)]
    shape: Option<u8>,
    #[arg(long, value_enum, default_value = "none")]
    distance: DistanceArg,
    #[arg(long, value_enum, default_value = "none")]
    alignment: AlignmentArg,
    #[arg(long)]
    attached: bool,
    /// Outcome names; defaults to the useful outcomes.
    #[arg(long, value_delimiter = ',')]
    goals: Vec<String>,
    /// Read rules from this file instead of a centre.
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long, env = "COGNITE_CENTRE_ADDR", default_value = DEFAULT_ADDR)]
    addr: String,
}

#[derive(Args, Debug)]
struct MissionArgs {
    #[arg(long, default_value_t = 48)]
    width: i32,
    #[arg(long, default_value_t = 48)]
    height: i32,
    #[arg(long, default_value_t = 600)]
    budget: u32,
    #[arg(long, default_value_t = 40)]
    destroyers: u32,
    #[arg(long, default_value_t = 40)]
    stickers: u32,
    #[arg(long, default_value_t = 25)]
    supplies: u32,
    #[arg(long, default_value_t = 15)]
    conveyors: u32,
}

impl MissionArgs {
    fn config(&self, seed: u64) -> MissionConfig {
        MissionConfig {
            width: self.width,
            height: self.height,
            tick_budget: self.budget,
            mix: ObjectMix {
                destroyer: self.destroyers,
                sticker: self.stickers,
                power_supply: self.supplies,
                conveyor: self.conveyors,
            },
            seed,
            ..MissionConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    seed: u64,
    /// Rule base file.
    #[arg(long, conflicts_with_all = ["centre", "oracle"])]
    rules: Option<PathBuf>,
    /// Fetch the rules from a centre at this address.
    #[arg(long, conflicts_with = "oracle")]
    centre: Option<String>,
    /// Use the hand-written reference rules.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    mission: MissionArgs,
}

#[derive(Args, Debug)]
struct DemoArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    episodes: usize,
    #[arg(long, default_value_t = 20)]
    missions: u64,
    #[arg(long, default_value_t = 4)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct PlayArgs {
    #[arg(long, env = "COGNITE_CENTRE_ADDR", default_value = DEFAULT_ADDR)]
    addr: String,
    /// Browser socket address.
    #[arg(long, default_value = "127.0.0.1:7879")]
    ws: String,
    #[arg(long)]
    log: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

/// Exit codes, one per failure family.
mod exit {
    pub const OTHER: u8 = 1;
    pub const FILE: u8 = 3;
    pub const UNREACHABLE: u8 = 4;
    pub const REMOTE: u8 = 5;
    pub const INVALID: u8 = 6;
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Failure {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<cognite::Error> for Failure {
    fn from(e: cognite::Error) -> Failure {
        use cognite::Error as E;
        let code = match &e {
            E::Io(_) => exit::FILE,
            E::Protocol { .. } | E::Remote { .. } => exit::REMOTE,
            E::InvalidConfig(_)
            | E::MalformedPacket(_)
            | E::MalformedRules(_)
            | E::CorruptLog { .. }
            | E::CorruptTrace { .. }
            | E::Json(_) => exit::INVALID,
            E::Contract(_) | E::SessionClosed(_) => exit::OTHER,
        };
        Failure::new(code, e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn file_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(exit::FILE, format!("{}: {e}", path.display()))
}

fn open_file(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| file_error(path, e))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| file_error(path, e))
}

fn write_manifest(m: &RunManifest, artifact: &Path) -> CliResult<()> {
    m.write_beside(artifact)
        .map(|_| ())
        .map_err(|e| file_error(artifact, e))
}

fn read_rules(path: &Path) -> CliResult<RuleBase> {
    let text = std::fs::read_to_string(path).map_err(|e| file_error(path, e))?;
    let rb = RuleBase::from_json(&text)
        .map_err(|e| Failure::new(exit::INVALID, format!("{}: {e}", path.display())))?;
    rb.check()
        .map_err(|e| Failure::new(exit::INVALID, format!("{}: {e}", path.display())))?;
    Ok(rb)
}

fn connect(addr: &str, module_id: &str) -> CliResult<Client> {
    Client::open(addr, module_id).map_err(|e| match e {
        cognite::Error::Io(io) => Failure::new(
            exit::UNREACHABLE,
            format!("centre {addr} unreachable: {io}"),
        ),
        other => other.into(),
    })
}

fn parse_objects(names: &[String]) -> CliResult<Vec<ObjectKind>> {
    let mut out = Vec::new();
    for name in names {
        if name == "all" {
            out.extend(ObjectKind::ALL);
            continue;
        }
        let kind = ObjectKind::parse(name)
            .ok_or_else(|| Failure::new(exit::INVALID, format!("unknown object {name:?}")))?;
        out.push(kind);
    }
    Ok(out)
}

fn parse_policy(name: &str) -> CliResult<PolicyKind> {
    PolicyKind::parse(name)
        .ok_or_else(|| Failure::new(exit::INVALID, format!("unknown policy {name:?}")))
}

/// Run `work` over `items` on up to `jobs` threads; results keep item order.
fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    work: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = work(&items[i]);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().unwrap())
        .collect()
}

fn train(kind: ObjectKind, policy: PolicyKind, seed: u64, episodes: usize) -> Vec<Episode> {
    let mut session = ModuleSession::open(module_name(kind), kind, module_seed(kind, seed));
    let mut bot = match policy {
        PolicyKind::Random => Policy::random(seed),
        PolicyKind::EpsilonGreedy => Policy::epsilon_greedy(seed),
    };
    run_bot(&mut session, &mut bot, episodes)
}

fn cmd_module(a: &ModuleArgs, argv: &[String]) -> CliResult<()> {
    let kinds = parse_objects(&a.object)?;
    let policy = parse_policy(&a.policy)?;
    if a.episodes == 0 {
        return Err(Failure::new(exit::INVALID, "--episodes must be at least 1"));
    }
    let runs = parallel_map(&kinds, a.jobs, |&k| train(k, policy, a.seed, a.episodes));
    let episodes: Vec<Episode> = runs.into_iter().flatten().collect();
    let file = File::create(&a.out).map_err(|e| file_error(&a.out, e))?;
    cognite::trace::write_episodes(BufWriter::new(file), &episodes)?;
    let mut m = RunManifest::new("module", argv);
    m.seeds.push(a.seed);
    m.outputs.push(a.out.clone());
    write_manifest(&m, &a.out)?;
    println!("{} episodes -> {}", episodes.len(), a.out.display());
    Ok(())
}

fn cmd_induce(a: &InduceArgs, argv: &[String]) -> CliResult<()> {
    let mut episodes = Vec::new();
    for path in &a.inputs {
        let eps = cognite::trace::read_episodes(open_file(path)?)
            .map_err(|e| Failure::new(exit::INVALID, format!("{}: {e}", path.display())))?;
        episodes.extend(eps);
    }
    let mut rb = induce(&episodes);
    if a.min_support.is_some() || a.min_confidence.is_some() {
        let support = a.min_support.unwrap_or(1);
        let confidence = a.min_confidence.unwrap_or(0.0);
        if support == 0 || !(0.0..=1.0).contains(&confidence) {
            return Err(Failure::new(exit::INVALID, "prune thresholds out of range"));
        }
        rb = rb.prune(support, confidence);
    }
    let mut text = cognite::canonical::to_string_pretty(&rb);
    text.push('\n');
    write_file(&a.out, &text)?;
    let mut m = RunManifest::new("induce", argv);
    m.inputs = a.inputs.clone();
    m.outputs.push(a.out.clone());
    write_manifest(&m, &a.out)?;
    println!(
        "{} rules from {} episodes -> {}",
        rb.entries().len(),
        episodes.len(),
        a.out.display()
    );
    Ok(())
}

fn open_centre(log: Option<&Path>) -> CliResult<CentreState> {
    Ok(match log {
        Some(path) => CentreState::open(path)?,
        None => CentreState::in_memory(),
    })
}

fn cmd_serve(a: &ServeArgs) -> CliResult<()> {
    let centre = Arc::new(Mutex::new(open_centre(a.log.as_deref())?));
    let server = Server::spawn(&a.addr, centre)
        .map_err(|e| Failure::new(exit::FILE, format!("bind {}: {e}", a.addr)))?;
    println!("centre listening on {}", server.local_addr());
    std::io::stdout().flush().ok();
    server.wait();
    Ok(())
}

fn cmd_submit(a: &SubmitArgs) -> CliResult<()> {
    let rules = read_rules(&a.rules)?;
    let packet = SkillPacket::new(
        a.module_id.clone(),
        a.shape_id,
        rules,
        a.first_episode,
        a.episodes,
    );
    let id = packet.packet_id.clone();
    let mut client = connect(&a.addr, &a.module_id)?;
    let status = client.submit(packet)?;
    client.bye()?;
    println!(
        "{}",
        cognite::canonical::to_string(&serde_json::json!({"packet_id": id, "status": status}))
    );
    Ok(())
}

fn cmd_query(a: &QueryArgs) -> CliResult<()> {
    let context = match a.shape {
        None => RuleContext {
            attached: a.attached,
            ..RuleContext::EMPTY
        },
        Some(shape) => RuleContext {
            shape_id: Some(shape),
            distance: match a.distance {
                DistanceArg::Adjacent => DistanceBucket::Adjacent,
                DistanceArg::Near => DistanceBucket::Near,
                DistanceArg::Far => DistanceBucket::Far,
                DistanceArg::None => DistanceBucket::None,
            },
            alignment: match a.alignment {
                AlignmentArg::AxisH => Alignment::AxisH,
                AlignmentArg::AxisV => Alignment::AxisV,
                AlignmentArg::Diagonal => Alignment::Diagonal,
                AlignmentArg::None => Alignment::None,
            },
            attached: a.attached,
        },
    };
    let goals: BTreeSet<EventKind> = if a.goals.is_empty() {
        EventKind::USEFUL.into_iter().collect()
    } else {
        a.goals
            .iter()
            .map(|g| {
                EventKind::parse(g)
                    .ok_or_else(|| Failure::new(exit::INVALID, format!("unknown outcome {g:?}")))
            })
            .collect::<CliResult<_>>()?
    };
    let ranked = match &a.rules {
        Some(path) => read_rules(path)?.query(&context, &goals),
        None => {
            let mut client = connect(&a.addr, "cli-query")?;
            let r = client.query(context, goals)?;
            client.bye()?;
            r
        }
    };
    println!("{}", cognite::canonical::to_string_pretty(&ranked));
    Ok(())
}

fn fetch_centre_rules(addr: &str) -> CliResult<RuleBase> {
    let mut client = connect(addr, "cli-solve")?;
    let rb = fetch_base(&mut client)?;
    client.bye()?;
    Ok(rb)
}

fn cmd_solve(a: &SolveArgs, argv: &[String]) -> CliResult<()> {
    let rules = if a.oracle {
        oracle_rulebase()
    } else if let Some(path) = &a.rules {
        read_rules(path)?
    } else if let Some(addr) = &a.centre {
        fetch_centre_rules(addr)?
    } else {
        RuleBase::new()
    };
    let config = a.mission.config(a.seed);
    let result = solve(&config, &rules)?;
    let mut text = cognite::canonical::to_string_pretty(&result);
    text.push('\n');
    write_file(&a.out, &text)?;
    let mut m = RunManifest::new("solve", argv);
    m.seeds.push(a.seed);
    m.inputs.extend(a.rules.clone());
    m.outputs.push(a.out.clone());
    write_manifest(&m, &a.out)?;
    println!(
        "{:?} after {} ticks -> {}",
        result.outcome,
        result.ticks,
        a.out.display()
    );
    Ok(())
}

fn cmd_demo(a: &DemoArgs) -> CliResult<()> {
    let centre = Arc::new(Mutex::new(CentreState::in_memory()));
    let server = Server::spawn("127.0.0.1:0", centre.clone())?;
    let addr = server.local_addr().to_string();

    println!(
        "training {} episodes per module (seed {})",
        a.episodes, a.seed
    );
    let runs = parallel_map(&ObjectKind::ALL, a.jobs, |&k| {
        (k, train(k, PolicyKind::EpsilonGreedy, a.seed, a.episodes))
    });
    println!(
        "{:<10} {:>8} {:>8} {:>10}  ack",
        "module", "episodes", "success", "rules"
    );
    for (kind, episodes) in &runs {
        let rules = induce(episodes);
        let module = module_name(*kind);
        let packet = SkillPacket::new(
            module.clone(),
            kind.shape_id(),
            rules.clone(),
            0,
            episodes.len() as u32,
        );
        let mut client = connect(&addr, &module)?;
        let ack = client.submit(packet)?;
        client.bye()?;
        let wins = episodes.iter().filter(|e| e.is_success()).count();
        println!(
            "{:<10} {:>8} {:>7.0}% {:>10}  {:?}",
            module,
            episodes.len(),
            100.0 * wins as f64 / episodes.len().max(1) as f64,
            rules.entries().len(),
            ack
        );
    }
    let accumulated = fetch_centre_rules(&addr)?;
    server.shutdown();

    let seeds: Vec<u64> = (0..a.missions)
        .map(|i| a.seed.wrapping_mul(1000).wrapping_add(i))
        .collect();
    println!();
    println!(
        "{:<12} {:>8} {:>10} {:>8} {:>10}",
        "rules", "reached", "destroyed", "timeout", "mean ticks"
    );
    for (name, rules) in [
        ("empty", RuleBase::new()),
        ("accumulated", accumulated),
        ("oracle", oracle_rulebase()),
    ] {
        let results = parallel_map(&seeds, a.jobs, |&s| solve(&MissionConfig::suite(s), &rules));
        let mut counts = [0usize; 3];
        let mut ticks = 0u64;
        for r in results {
            let r = r?;
            ticks += r.ticks as u64;
            counts[match r.outcome {
                Outcome::Reached => 0,
                Outcome::Destroyed => 1,
                Outcome::Timeout => 2,
            }] += 1;
        }
        println!(
            "{:<12} {:>8} {:>10} {:>8} {:>10.1}",
            name,
            counts[0],
            counts[1],
            counts[2],
            ticks as f64 / seeds.len().max(1) as f64
        );
    }
    Ok(())
}

fn cmd_play(a: &PlayArgs) -> CliResult<()> {
    let centre = Arc::new(Mutex::new(open_centre(a.log.as_deref())?));
    let server = Server::spawn(&a.addr, centre.clone())
        .map_err(|e| Failure::new(exit::FILE, format!("bind {}: {e}", a.addr)))?;
    let listener =
        bridge::bind(&a.ws).map_err(|e| Failure::new(exit::FILE, format!("bind {}: {e}", a.ws)))?;
    println!("sessions on tcp://{}", server.local_addr());
    println!(
        "browser socket on ws://{}",
        listener
            .local_addr()
            .map_err(|e| file_error(Path::new(&a.ws), e))?
    );
    std::io::stdout().flush().ok();
    bridge::serve(listener, centre);
    server.wait();
    Ok(())
}

fn dispatch(cli: &Cli, argv: &[String]) -> CliResult<()> {
    match &cli.command {
        Command::Module(a) => cmd_module(a, argv),
        Command::Induce(a) => cmd_induce(a, argv),
        Command::Centre {
            command: CentreCommand::Serve(a),
        } => cmd_serve(a),
        Command::Submit(a) => cmd_submit(a),
        Command::Query(a) => cmd_query(a),
        Command::Solve(a) => cmd_solve(a, argv),
        Command::Demo(a) => cmd_demo(a),
        Command::Play(a) => cmd_play(a),
        Command::Rerun { manifest } => {
            let m = RunManifest::read(manifest).map_err(|e| file_error(manifest, e))?;
            let mut full = vec!["cognite".to_string()];
            full.extend(m.argv.iter().cloned());
            let cli = Cli::try_parse_from(&full)
                .map_err(|e| Failure::new(exit::INVALID, e.to_string()))?;
            if matches!(cli.command, Command::Rerun { .. }) {
                return Err(Failure::new(
                    exit::INVALID,
                    "a manifest cannot rerun another manifest",
                ));
            }
            dispatch(&cli, &m.argv)
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match dispatch(&cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("cognite: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
