fn main() {
    // Rust ignores SIGPIPE by default, which turns `latentree ... | head`
    // into a panic mid-print. Restore the conventional behavior for
    // line-oriented tools: terminate quietly when the read end closes.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(latentree::cli::run());
}
