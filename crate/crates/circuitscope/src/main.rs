// SPDX-License-Identifier: MIT OR Apache-2.0

fn main() {
    let args: Vec<std::ffi::OsString> = std::env::args_os().collect();
    std::process::exit(circuitscope::cli::run(args));
}
