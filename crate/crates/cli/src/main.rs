use clap::{Args, Parser, Subcommand};
use kiteflow::bquad::{generate_square_grid, load_bquad, save_bquad, Labelling, WhiteGraph};
use kiteflow::dcmap::{build_map, dilatation};
use kiteflow::euclid::{solve_dirichlet, DirichletProblem, SolveOptions};
use kiteflow::harness::{
    effective_seed, run_convergence_with_patterns, run_rigidity, tau_diagnostic, ConvergenceSpec, Domain, RefMap,
    RigiditySpec,
};
use kiteflow::hyper::{minimize_s_hyp, minimize_s_hyp_gen, HypRadiusAssignment, HypSolveOptions};
use kiteflow::layout::{layout, pattern_from_json, pattern_to_json, to_svg, Anchor, Point, SvgOptions};
use kiteflow::network::{
    annuli_resistance_profile, conductances_from_pattern, constants, effective_resistance, vel, Graph, VelOptions,
};
use kiteflow::{Error, Result};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "kiteflow", version, about = "Circle patterns with prescribed intersection angles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph file.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Solve the Euclidean Dirichlet problem for the radii.
    Solve(SolveArgs),
    /// Minimize the hyperbolic functional.
    Hsolve(HsolveArgs),
    /// Lay out a pattern from solved radii.
    Layout(LayoutArgs),
    /// Evaluate the piecewise affine map between two patterns.
    Map(MapArgs),
    /// Electrical network quantities of a pattern.
    Net(NetArgs),
    /// Run a convergence experiment.
    Converge(ConvergeArgs),
    /// Run a rigidity interpolation experiment.
    Rigidity(RigidityArgs),
    /// Print the constants C0, C2, C6.
    Constants(ConstantsArgs),
    /// Ratio of radius to distance from an origin for each circle.
    Tau(TauArgs),
}

#[derive(Subcommand)]
enum GenCommand {
    /// Square grid of n by m quads with a constant angle.
    Sg {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
        alpha: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(short, long)]
    graph: PathBuf,
    /// Radii file; only the boundary entries are read.
    #[arg(short, long)]
    boundary: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
}

#[derive(Args)]
struct HsolveArgs {
    #[arg(short, long)]
    graph: PathBuf,
    /// Assignment file with `rho` and optionally `kind` and `beta`; interior entries are ignored.
    #[arg(short, long)]
    boundary: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
}

#[derive(Args)]
struct LayoutArgs {
    #[arg(short, long)]
    graph: PathBuf,
    #[arg(short, long)]
    radii: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    root: usize,
    /// Position of the root center as `x,y`.
    #[arg(long, default_value = "0,0", allow_hyphen_values = true, value_parser = parse_xy)]
    position: Point,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    direction: f64,
}

#[derive(Args)]
struct MapArgs {
    #[arg(short, long)]
    source: PathBuf,
    #[arg(short, long)]
    target: PathBuf,
    /// JSON array of `[x, y]` points.
    #[arg(long)]
    eval: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    dilatation: bool,
}

#[derive(Args)]
struct NetArgs {
    #[arg(short, long)]
    graph: PathBuf,
    /// Radii file; needed for the conductances.
    #[arg(short = 'r', long = "radius-file")]
    radius_file: Option<PathBuf>,
    #[arg(long, num_args = 2, value_names = ["A", "Z"], conflicts_with_all = ["vel", "profile"])]
    reff: Option<Vec<PathBuf>>,
    #[arg(long, num_args = 2, value_names = ["V1", "V2"], conflicts_with = "profile")]
    vel: Option<Vec<PathBuf>>,
    /// Center vertex of the annuli profile.
    #[arg(long, requires = "radii")]
    profile: Option<usize>,
    /// Disc radii of the annuli profile.
    #[arg(long, value_delimiter = ',')]
    radii: Vec<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    /// `disc`, `disc:cx,cy,r`, `square` or `square:cx,cy,side`.
    #[arg(long, default_value = "disc")]
    domain: String,
    #[arg(long, default_value = "moebius:0.3")]
    map: String,
    #[arg(long, value_delimiter = ',', default_values_t = [8, 16, 32])]
    levels: Vec<usize>,
    #[arg(long, default_value_t = 0.2)]
    margin: f64,
    #[arg(long, default_value_t = 2.0)]
    q_max: f64,
    #[arg(long, default_value_t = 0.02)]
    sample_step: f64,
    #[arg(long, default_value_t = 1e-11)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    svg_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RigidityArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [8, 16, 24])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    amp: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.25, 0.5, 0.75, 1.0])]
    tgrid: Vec<f64>,
    #[arg(long, default_value_t = 1e-4)]
    step: f64,
    #[arg(long, default_value_t = 1e-13)]
    tol: f64,
    #[arg(long, default_value_t = 3.0)]
    core_radius: f64,
    #[arg(long, default_value_t = 8)]
    replicates: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ConstantsArgs {
    #[arg(long)]
    alpha0: f64,
    /// Overlap number N.
    #[arg(long)]
    n: f64,
    #[arg(long)]
    c1: f64,
}

#[derive(Args)]
struct TauArgs {
    #[arg(short, long)]
    graph: PathBuf,
    #[arg(short, long)]
    pattern: PathBuf,
    /// Origin as `x,y`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_xy)]
    origin: Point,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_xy(s: &str) -> std::result::Result<Point, String> {
    match s.split(',').map(|x| x.trim().parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>() {
        Ok(v) if v.len() == 2 => Ok(Point::new(v[0], v[1])),
        _ => Err(format!("expected x,y but got {s:?}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen(GenCommand::Sg { n, m, alpha, output }) => {
            check_output(&output)?;
            let (d, a) = generate_square_grid(n, m, alpha)?;
            save_bquad(&output, &d, &a)?;
            println!(
                "wrote {} white, {} black, {} quads to {}",
                d.n_white(),
                d.n_black(),
                d.n_quads(),
                output.display()
            );
        }
        Command::Solve(args) => solve(args)?,
        Command::Hsolve(args) => hsolve(args)?,
        Command::Layout(args) => layout_cmd(args)?,
        Command::Map(args) => map_cmd(args)?,
        Command::Net(args) => net(args)?,
        Command::Converge(args) => converge(args)?,
        Command::Rigidity(args) => rigidity(args)?,
        Command::Constants(args) => {
            let c = constants(args.alpha0, args.n, args.c1)?;
            println!("{}", to_json(&c));
        }
        Command::Tau(args) => tau(args)?,
    }
    Ok(())
}

fn check_input(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Io(format!("{}: no such file", path.display())))
    }
}

fn check_output(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(Error::Io(format!("{}: no such directory", dir.display())))
        }
        _ => Ok(()),
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serialization")
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => write_text(p, text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_graph(path: &Path) -> Result<(WhiteGraph, Labelling)> {
    let (d, a) = load_bquad(path)?;
    Ok((d.white_graph(), a))
}

/// Entries of a numeric array field; `null` becomes `None`.
fn optional_numbers(v: &Value, key: &str, path: &Path) -> Result<Vec<Option<f64>>> {
    let bad = || Error::Parse(format!("{}: field {key:?} must be an array of numbers", path.display()));
    v.get(key)
        .and_then(Value::as_array)
        .ok_or_else(bad)?
        .iter()
        .map(|x| if x.is_null() { Ok(None) } else { x.as_f64().map(Some).ok_or_else(bad) })
        .collect()
}

fn expect_len<T>(xs: &[T], n: usize, path: &Path) -> Result<()> {
    if xs.len() == n {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{}: {} entries for {n} white vertices", path.display(), xs.len())))
    }
}

fn read_radii(path: &Path, n: usize) -> Result<Vec<f64>> {
    let r = optional_numbers(&read_json(path)?, "r", path)?;
    expect_len(&r, n, path)?;
    r.into_iter().enumerate().map(|(v, x)| x.ok_or(Error::MissingRadius(v))).collect()
}

fn read_vertex_set(path: &Path) -> Result<Vec<usize>> {
    serde_json::from_value(read_json(path)?)
        .map_err(|e| Error::Parse(format!("{}: expected an array of vertex indices: {e}", path.display())))
}

fn solve(args: SolveArgs) -> Result<()> {
    check_input(&args.graph)?;
    check_input(&args.boundary)?;
    check_output(&args.output)?;
    let (g, a) = load_graph(&args.graph)?;
    let given = optional_numbers(&read_json(&args.boundary)?, "r", &args.boundary)?;
    expect_len(&given, g.n, &args.boundary)?;
    let boundary = (0..g.n).map(|v| if g.boundary[v] { given[v] } else { None }).collect();
    let problem = DirichletProblem::new(&g, &a, boundary)?;
    let opts = SolveOptions { tol: args.tol, max_iter: args.max_iter, ..Default::default() };
    let (rho, report) = solve_dirichlet(&problem, &opts)?;
    write_text(&args.output, &json!({ "r": rho.radii() }).to_string())?;
    println!("converged in {} iterations, residual {:e}", report.iterations, report.residual);
    Ok(())
}

fn hsolve(args: HsolveArgs) -> Result<()> {
    check_input(&args.graph)?;
    check_input(&args.boundary)?;
    check_output(&args.output)?;
    let (g, a) = load_graph(&args.graph)?;
    let v = read_json(&args.boundary)?;
    // interior entries are placeholders; the solver chooses its own start
    let rho: Vec<f64> = optional_numbers(&v, "rho", &args.boundary)?.into_iter().map(|x| x.unwrap_or(-1.0)).collect();
    expect_len(&rho, g.n, &args.boundary)?;
    let opts = HypSolveOptions { tol: args.tol, max_iter: args.max_iter, ..Default::default() };
    let (sol, report) = if v.get("kind").is_some() {
        let mut given: HypRadiusAssignment =
            serde_json::from_value(v.clone()).map_err(|e| Error::Parse(format!("{}: {e}", args.boundary.display())))?;
        given.rho = rho;
        minimize_s_hyp_gen(&g, &a, &given, &opts)?
    } else {
        minimize_s_hyp(&g, &a, &rho, &opts)?
    };
    write_text(&args.output, &to_json(&sol))?;
    println!(
        "{} after {} iterations, gradient norm {:e}",
        if report.converged { "converged" } else { "stopped" },
        report.iterations,
        report.gradient_norm
    );
    Ok(())
}

fn layout_cmd(args: LayoutArgs) -> Result<()> {
    check_input(&args.graph)?;
    check_input(&args.radii)?;
    check_output(&args.output)?;
    if let Some(svg) = &args.svg {
        check_output(svg)?;
    }
    let (g, a) = load_graph(&args.graph)?;
    let r = read_radii(&args.radii, g.n)?;
    let anchor = Anchor { root: args.root, position: args.position, direction: args.direction };
    let p = layout(&g, &a, &r, anchor)?;
    write_text(&args.output, &pattern_to_json(&p))?;
    if let Some(svg) = &args.svg {
        write_text(svg, &to_svg(&p, &SvgOptions::default()))?;
    }
    println!("laid out {} circles, diameter {}", p.center.len(), p.diameter());
    Ok(())
}

fn read_pattern(path: &Path) -> Result<kiteflow::layout::CirclePattern> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    pattern_from_json(&text)
}

fn map_cmd(args: MapArgs) -> Result<()> {
    check_input(&args.source)?;
    check_input(&args.target)?;
    if let Some(p) = &args.eval {
        check_input(p)?;
    }
    if let Some(p) = &args.output {
        check_output(p)?;
    }
    let src = read_pattern(&args.source)?.kite_pattern();
    let tgt = read_pattern(&args.target)?.kite_pattern();
    let m = build_map(&src, &tgt)?;
    let mut out = serde_json::Map::new();
    if let Some(path) = &args.eval {
        let points: Vec<[f64; 2]> = serde_json::from_value(read_json(path)?)
            .map_err(|e| Error::Parse(format!("{}: expected an array of [x, y]: {e}", path.display())))?;
        let images =
            points.iter().map(|&[x, y]| m.eval(Point::new(x, y)).map(|w| [w.re, w.im])).collect::<Result<Vec<_>>>()?;
        out.insert("images".into(), json!(images));
    }
    if args.dilatation {
        let d = dilatation(&m)?;
        out.insert("dilatation".into(), json!({ "max": d.max, "per_triangle": d.per_triangle }));
    }
    emit(args.output.as_deref(), &Value::Object(out).to_string())
}

fn net(args: NetArgs) -> Result<()> {
    check_input(&args.graph)?;
    for p in args.radius_file.iter().chain(args.reff.iter().flatten()).chain(args.vel.iter().flatten()) {
        check_input(p)?;
    }
    if let Some(p) = &args.output {
        check_output(p)?;
    }
    let (g, a) = load_graph(&args.graph)?;
    let need_radii = || -> Result<Vec<f64>> {
        let path = args.radius_file.as_ref().ok_or_else(|| Error::InvalidInput("--radius-file is required".into()))?;
        read_radii(path, g.n)
    };
    let out = if let Some(files) = &args.reff {
        let wg = conductances_from_pattern(&g, &a, &need_radii()?)?;
        let r = effective_resistance(&wg, &read_vertex_set(&files[0])?, &read_vertex_set(&files[1])?)?;
        json!({ "reff": r })
    } else if let Some(files) = &args.vel {
        let res =
            vel(&Graph::from(&g), &read_vertex_set(&files[0])?, &read_vertex_set(&files[1])?, &VelOptions::default())?;
        serde_json::to_value(&res).expect("serialization")
    } else if let Some(v0) = args.profile {
        let r = need_radii()?;
        let wg = conductances_from_pattern(&g, &a, &r)?;
        let p = layout(&g, &a, &r, Anchor::default())?;
        let profile = annuli_resistance_profile(&wg, &p.center, v0, &args.radii)?;
        json!({ "radii": args.radii, "reff": profile })
    } else {
        return Err(Error::InvalidInput("one of --reff, --vel or --profile is required".into()));
    };
    emit(args.output.as_deref(), &out.to_string())
}

fn parse_domain(s: &str) -> Result<Domain> {
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));
    let nums: Vec<f64> = if rest.is_empty() {
        Vec::new()
    } else {
        rest.split(',')
            .map(|x| x.trim().parse().map_err(|_| Error::Parse(format!("bad number {x:?} in domain {s:?}"))))
            .collect::<Result<_>>()?
    };
    match (name, nums.as_slice()) {
        ("disc", []) => Ok(Domain::unit_disc()),
        ("disc", &[x, y, radius]) => Ok(Domain::Disc { center: (x, y), radius }),
        ("square", []) => Ok(Domain::Square { center: (0.0, 0.0), side: 2.0 }),
        ("square", &[x, y, side]) => Ok(Domain::Square { center: (x, y), side }),
        _ => Err(Error::Parse(format!("bad domain {s:?}"))),
    }
}

fn converge(args: ConvergeArgs) -> Result<()> {
    check_output(&args.output)?;
    if let Some(dir) = &args.svg_dir {
        if !dir.is_dir() {
            return Err(Error::Io(format!("{}: no such directory", dir.display())));
        }
    }
    let spec = ConvergenceSpec {
        domain: parse_domain(&args.domain)?,
        map: args.map.parse::<RefMap>()?,
        levels: args.levels,
        margin: args.margin,
        q_max: args.q_max,
        sample_step: args.sample_step,
        tol: args.tol,
        seed: effective_seed(args.seed),
    };
    let (report, patterns) = run_convergence_with_patterns(&spec)?;
    write_text(&args.output, &to_json(&report))?;
    if let Some(dir) = &args.svg_dir {
        for lp in &patterns {
            write_text(&dir.join(format!("source_{}.svg", lp.n)), &to_svg(&lp.source, &SvgOptions::default()))?;
            write_text(&dir.join(format!("target_{}.svg", lp.n)), &to_svg(&lp.target, &SvgOptions::default()))?;
        }
    }
    for row in &report.rows {
        println!(
            "n {:4}  sup error {:.3e}  delta~ {:.3e}  max K {:.4}",
            row.n, row.sup_error, row.delta_tilde, row.max_dilatation
        );
    }
    Ok(())
}

fn rigidity(args: RigidityArgs) -> Result<()> {
    if let Some(p) = &args.output {
        check_output(p)?;
    }
    let spec = RigiditySpec {
        sizes: args.sizes,
        amplitude: args.amp,
        t_grid: args.tgrid,
        step: args.step,
        tol: args.tol,
        core_radius: args.core_radius,
        replicates: args.replicates,
        seed: effective_seed(args.seed),
    };
    let report = run_rigidity(&spec)?;
    match &args.output {
        Some(p) => {
            write_text(p, &to_json(&report))?;
            for row in &report.rows {
                println!(
                    "size {:3}  max |lap h| {:.3e}  max |h| {:.3e}  core var {:.3e}",
                    row.size, row.max_abs_laplacian, row.max_abs_h, row.var_h_core
                );
            }
        }
        None => println!("{}", to_json(&report)),
    }
    Ok(())
}

fn tau(args: TauArgs) -> Result<()> {
    check_input(&args.graph)?;
    check_input(&args.pattern)?;
    if let Some(p) = &args.output {
        check_output(p)?;
    }
    let (g, _) = load_graph(&args.graph)?;
    let p = read_pattern(&args.pattern)?;
    let report = tau_diagnostic(&p, &g.boundary, args.origin)?;
    emit(args.output.as_deref(), &to_json(&report))
}
