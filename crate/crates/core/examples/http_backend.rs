//! Talk to a generation service over the JSON wire protocol.
//!
//! A tiny mock service is started on a local port; it answers with the first
//! words of the prompt and fails every third request with a 503 so the retry
//! path shows up too.
//!
//! ```not_rust
//! cargo run --example http_backend
//! ```

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};
use tabcap::generation::{ClientConfig, GenRequest, GenerationClient, HttpBackend};
use tabcap::prompt::PromptStyle;
use tiny_http::{Header, Response, Server};

fn serve(server: Arc<Server>) {
    let hits = AtomicUsize::new(0);
    for mut request in server.incoming_requests() {
        let mut body = String::new();
        request.as_reader().read_to_string(&mut body).ok();
        let json_header = Header::from_bytes("Content-Type", "application/json").unwrap();
        let (status, reply) = if hits.fetch_add(1, Ordering::SeqCst) % 3 == 2 {
            (503, json!({ "error": "busy" }))
        } else {
            let parsed: Value = serde_json::from_str(&body).unwrap_or(Value::Null);
            let prompt = parsed["prompt"].as_str().unwrap_or_default();
            let words: Vec<&str> = prompt.split_whitespace().take(5).collect();
            (200, json!({ "continuation": words.join(" "), "backend_id": "mock-echo" }))
        };
        let response = Response::from_string(reply.to_string()).with_status_code(status).with_header(json_header);
        request.respond(response).ok();
    }
}

fn main() {
    let server = Arc::new(Server::http("127.0.0.1:0").expect("bind"));
    let endpoint = format!("http://{}", server.server_addr().to_ip().expect("ip address"));
    thread::spawn({
        let server = Arc::clone(&server);
        move || serve(server)
    });

    let backend = HttpBackend::new(&endpoint, Duration::from_secs(5)).expect("client");
    println!("POST {}", backend.url());
    let config = ClientConfig { backoff: Duration::from_millis(20), parallelism: 2, ..ClientConfig::default() };
    let client = GenerationClient::new(Arc::new(backend), config);

    let requests: Vec<GenRequest> = (0..6)
        .map(|i| GenRequest::greedy(PromptStyle::Separator, format!("prompt {i} refractivity at sea level </s> Table {i}.")))
        .collect();
    println!("request body: {}", serde_json::to_string(&requests[0]).unwrap());
    for (i, result) in client.generate_batch(&requests).into_iter().enumerate() {
        match result {
            Ok(r) => println!("{i}: {:?} from {} in {} ms", r.continuation, r.backend_id, r.latency_ms),
            Err(e) => println!("{i}: error {e}"),
        }
    }
    server.unblock();
}
