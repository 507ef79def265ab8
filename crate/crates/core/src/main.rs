// SPDX-License-Identifier: Apache-2.0

use std::io::Write;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = wattbound::cli::main_with(args, &mut out, &mut std::io::stderr());
    let _ = out.flush();
    std::process::exit(code);
}
