//! Command-line front end for the contour-dynamics toolkit.

mod commands;
mod config;
mod io;
mod logger;
mod svg;

use std::path::Path;

const USAGE: &str = "\
usage: aggpatch <subcommand> [args]

subcommands:
  run <config.json>                 evolve a patch, writing snapshots, a
                                    diagnostics CSV, and optional grid dumps
                                    and SVG frames into output_dir
  compare <snapshot> <exact-spec>   deviation of a snapshot from an analytic
                                    solution at the matching rescaled time
  diag <snapshot> [grid]            one diagnostics row for a stored snapshot
  exact <exact-spec>                print the analytic boundary as a snapshot

exit codes: 0 success, 1 config/user error, 2 blow-up stop, 3 numerical failure
set LOGLEVEL to error, warn, info, or debug to control stderr verbosity
";

fn dispatch(args: &[String]) -> i32 {
    let p = Path::new;
    match (args.first().map(String::as_str), args.len()) {
        (Some("run"), 2) => commands::cmd_run(p(&args[1])),
        (Some("compare"), 3) => commands::cmd_compare(p(&args[1]), p(&args[2])),
        (Some("diag"), 2) => commands::cmd_diag(p(&args[1]), None),
        (Some("diag"), 3) => commands::cmd_diag(p(&args[1]), Some(p(&args[2]))),
        (Some("exact"), 2) => commands::cmd_exact(p(&args[1])),
        _ => {
            eprint!("{USAGE}");
            1
        }
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(dispatch(&args));
}
