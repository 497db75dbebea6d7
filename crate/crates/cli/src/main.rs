use fairrep::args::Args;
use fairrep::commands;

const USAGE: &str = "\
fairrep <command> [flags]

commands:
  train       fit an encoder (+ head or decoder) and report test fairness
              --data <cache> | --csv <file> [--csv-test <file>] --preprocess <adult|compas|spec.toml>
              [--config run.toml] [--mode sup|unsup] [--lambda X] [--seed N]
              [--epochs N] [--t-adv N] [--batch-size N] [--lr X] [--lr-adv X]
              [--optimizer adadelta|adam|sgd] [--fairness-target dp|eopp|eo]
              [--include-s true|false] [--m N] [--head-arch NAME]
              [--select final|acc-minus-dp|min-val-loss]
              [--standardize | --no-standardize] [--test-frac X] [--val-frac X]
              [--out DIR] [--force]
  sweep       one train run per lambda, plus a Pareto front
              train flags plus --lambdas 0,0.1,1,10,100
  downstream  fit prediction heads on a frozen encoder
              --checkpoint ck.json --data <cache> [--archs linear,leakyrelu1,sigmoid1,sigmoid2]
              [--downstream-epochs N] [--seed N] [--out DIR]
  verify      run the analysis verification suite
              [--seed N] [--out report.json]
  synth       generate a synthetic dataset cache with Monte-Carlo ground truth
              --out data.bin [--n N] [--d N] [--delta X] [--bias-s X] [--w 1,1,..]
              [--seed N] [--train-frac X] [--val-frac X] [--ground-truth gt.json]
  report      evaluate a checkpoint on one split
              --checkpoint ck.json --data <cache> [--split train|val|test] [--out report.json]

exit codes: 0 success, 1 verification/assertion failure, 2 user error
";

fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let Some((command, rest)) = argv.split_first() else {
        eprint!("{USAGE}");
        std::process::exit(2);
    };
    let result = Args::parse(rest).and_then(|args| match command.as_str() {
        "train" => commands::cmd_train(&args),
        "sweep" => commands::cmd_sweep(&args),
        "downstream" => commands::cmd_downstream(&args),
        "verify" => commands::cmd_verify(&args),
        "synth" => commands::cmd_synth(&args),
        "report" => commands::cmd_report(&args),
        "help" | "--help" | "-h" => {
            print!("{USAGE}");
            Ok(())
        }
        other => Err(fairrep::CliError::user(format!(
            "unknown command `{other}`; run `fairrep help`"
        ))),
    });
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code);
    }
}
