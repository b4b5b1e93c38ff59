fn main() {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var("ADAPTED_OT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = adapted_ot::cli::dispatch(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    std::process::exit(code);
}
