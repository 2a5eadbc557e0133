//! Standalone mock beacon node serving the canned fixture.
//!
//! Usage: `mock-beacon [ADDR]` (default `127.0.0.1:18550`).

use std::net::SocketAddr;

use clientprint_beacon::mock::{spawn, MockFixture, MOCK_PORT};

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let addr: SocketAddr = match std::env::args().nth(1) {
        Some(a) => a
            .parse()
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("{a}: {e}")))?,
        None => SocketAddr::from(([127, 0, 0, 1], MOCK_PORT)),
    };
    let handle = spawn(MockFixture::canned(), addr).await?;
    println!("mock beacon node listening on {}", handle.base_url());
    tokio::signal::ctrl_c().await?;
    handle.stop().await;
    Ok(())
}
