fn main() {
    std::process::exit(pidrop::experiment::run_experiment(std::env::args_os()));
}
