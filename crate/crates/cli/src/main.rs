use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use landchange_cli::{
    cmd_change, cmd_classify, cmd_render, cmd_run_with, cmd_sample, cmd_synth, cmd_train, CliResult,
};

/// Land-cover classification and post-classification change detection.
#[derive(Debug, Parser)]
#[command(name = "landchange", version, about)]
struct Args {
    /// Worker threads for per-pixel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract a training table from a scene and labelled GeoJSON features.
    Sample {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a CART tree; prints training accuracy as JSON.
    Train {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify every pixel of a scene.
    Classify {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two classmaps into a change map.
    Change {
        #[arg(long)]
        old: PathBuf,
        #[arg(long)]
        new: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Render a class or change map as PNG.
    Render {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        palette: Option<PathBuf>,
    },
    /// Run the full pipeline from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Train on this epoch instead of the oldest.
        #[arg(long)]
        train_epoch: Option<String>,
    },
    /// Generate synthetic scenes from a spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_prefix: String,
    },
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("plain data serializes")
    );
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Sample {
            scene,
            features,
            out,
        } => {
            print_json(&cmd_sample(&scene, &features, &out)?);
        }
        Command::Train { table, params, out } => {
            print_json(&cmd_train(&table, params.as_deref(), &out)?);
        }
        Command::Classify { tree, scene, out } => {
            cmd_classify(&tree, &scene, &out)?;
        }
        Command::Change {
            old,
            new,
            out,
            stats,
        } => {
            let s = cmd_change(&old, &new, &out, stats.as_deref())?;
            if stats.is_none() {
                print!("{}", s.to_json().expect("finite stats"));
            }
        }
        Command::Render { map, out, palette } => cmd_render(&map, &out, palette.as_deref())?,
        Command::Run {
            config,
            train_epoch,
        } => print_json(&cmd_run_with(&config, train_epoch.as_deref())?),
        Command::Synth { spec, out_prefix } => {
            for path in cmd_synth(&spec, &out_prefix)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("landchange: --threads {n}: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("landchange: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
