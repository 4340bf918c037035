use clap::Parser;

fn main() {
    let args = cvlink::cli::CliArgs::parse();
    match cvlink::cli::run(&args) {
        Ok(summary) => {
            let mut failed = 0usize;
            for a in &summary.assertions {
                let tag = if a.pass {
                    "PASS"
                } else {
                    failed += 1;
                    "FAIL"
                };
                println!("{tag} {} [{}]", a.name, a.detail);
            }
            println!("wrote {}", summary.out_dir.display());
            if failed > 0 {
                eprintln!("{failed} assertion(s) failed");
                std::process::exit(3);
            }
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
