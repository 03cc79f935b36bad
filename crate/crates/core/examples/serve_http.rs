//! The HTTP control surface.
//!
//! `cargo run --release --example serve_http -- [port] [model]`
//!
//! ```text
//! curl -s -XPOST localhost:8080/sessions -d '{"scenario":"c","seed":3}' -H 'content-type: application/json'
//! curl -s localhost:8080/sessions/1/state | head -c 300
//! curl -s -XPOST localhost:8080/sessions/1/step -d '{"choice":{"type":"push","strategy":"max"}}' -H 'content-type: application/json'
//! curl -s localhost:8080/sessions/1/history
//! ```

use std::net::SocketAddr;
use std::sync::Arc;

use sandshape::learner::load;
use sandshape::session::http::serve;

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let port: u16 = args.next().map_or(8080, |s| s.parse().expect("port"));
    let model = args.next().map(|p| Arc::new(load(p).expect("model file")));
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    println!("listening on http://{addr}");
    serve(addr, model).await
}
