//! Argument handling and entry points behind the `ucore-worker` and
//! `ucore-demo` executables.

pub mod demo;
pub mod worker;

use ucore::cluster::DEFAULT_PORT;

/// Process exit statuses shared by both executables.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    /// Connection loss, registration rejection and other runtime errors.
    pub const RUNTIME: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const NO_DEVICE: u8 = 3;
    pub const JOB_FAILED: u8 = 4;
}

/// `host` or `host:port`; the port defaults to 7077.
pub fn master_address(s: &str) -> Result<String, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("master address is empty".into());
    }
    match s.rsplit_once(':') {
        Some((host, port)) if !host.is_empty() && !port.contains(']') => {
            port.parse::<u16>()
                .map_err(|_| format!("invalid port {port:?} in {s:?}"))?;
            Ok(s.to_string())
        }
        Some(_) if !s.starts_with('[') => Err(format!("invalid master address {s:?}")),
        _ => Ok(format!("{s}:{DEFAULT_PORT}")),
    }
}
