use std::process::Command;

fn main() {
    // Baked in at build time; probing git at runtime would describe
    // whatever repository the user happens to run the binary from.
    let describe = Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|out| out.status.success())
        .and_then(|out| String::from_utf8(out.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unversioned".to_string());
    println!("cargo:rustc-env=DICE_GIT_DESCRIBE={describe}");
    println!("cargo:rerun-if-changed=build.rs");
}
