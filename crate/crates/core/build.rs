use std::process::Command;

fn main() {
    println!("cargo:rerun-if-changed=../../.git/HEAD");
    println!("cargo:rerun-if-env-changed=OAM_TURB_BUILD_ID");
    let id = std::env::var("OAM_TURB_BUILD_ID").ok().or_else(|| {
        let out = Command::new("git").args(["rev-parse", "--short=12", "HEAD"]).output().ok()?;
        out.status.success().then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
    });
    println!("cargo:rustc-env=OAM_TURB_BUILD_ID={}", id.unwrap_or_else(|| "unknown".into()));
}
