//! Serve the live simulation over websocket and drive it with a local client.
//!
//! With `--serve` it keeps serving on port 8080 until interrupted.

use futures_util::{SinkExt, StreamExt};
use tokio_tungstenite::connect_async;
use tokio_tungstenite::tungstenite::Message;
use urchin_sim::harness::{builtin, builtin_scenarios};
use urchin_sim::teleop::{decode_state, serve, start, ServerConfig};

#[tokio::main]
async fn main() -> urchin_sim::Result<()> {
    let serve_forever = std::env::args().any(|a| a == "--serve");
    let mut cfg = ServerConfig::new(if serve_forever { 8080 } else { 0 }, builtin("stance")?);
    cfg.scenarios = builtin_scenarios();
    if serve_forever {
        return serve(cfg).await;
    }

    let server = start(cfg).await?;
    let (mut ws, _) = connect_async(format!("ws://{}", server.local_addr())).await.expect("connect");
    ws.send(Message::text(r#"{"cmd":"spine","id":5,"target_mm":64}"#)).await.expect("send");
    ws.send(Message::text(r#"{"cmd":"spine","id":99,"target_mm":1}"#)).await.expect("send");
    let mut frames = 0;
    while let Some(Ok(msg)) = ws.next().await {
        let Message::Text(text) = msg else { continue };
        if text.contains(r#""type":"error""#) {
            println!("error reply: {text}");
            continue;
        }
        let state = decode_state(&text)?;
        frames += 1;
        if frames % 5 == 0 {
            println!("t={:.2}  spine 5 at {:.1} mm  {}", state.t_s, state.spines[5].extension_mm, state.phase);
        }
        if state.spines[5].extension_mm >= 64.0 {
            println!("spine 5 fully extended after {frames} frames");
            break;
        }
    }
    server.shutdown();
    Ok(())
}
