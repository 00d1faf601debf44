use std::io;

/// Keep freed heap memory mapped. Training allocates and releases tensors of
/// a few hundred megabytes every step; returning them to the kernel each
/// time makes page faults a large share of the run time.
#[cfg(all(target_os = "linux", target_env = "gnu"))]
fn retain_freed_memory() {
    // SAFETY: mallopt only adjusts allocator tunables; called before any
    // other thread exists.
    unsafe {
        libc::mallopt(libc::M_MMAP_MAX, 0);
        libc::mallopt(libc::M_TRIM_THRESHOLD, i32::MAX);
    }
}

#[cfg(not(all(target_os = "linux", target_env = "gnu")))]
fn retain_freed_memory() {}

fn main() {
    retain_freed_memory();
    let code = honeyscan_cli::run(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}
