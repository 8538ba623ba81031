mod common;

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;

use common::*;
use frontier_lab_core::ingest::{fetch_remote_into, load_csv, parse_csv};
use frontier_lab_core::Error;

/// Serves one HTTP response and returns the base URL.
fn serve_once(status: &'static str, body: String) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut line = String::new();
        while reader.read_line(&mut line).unwrap() > 0 {
            if line == "\r\n" {
                break;
            }
            line.clear();
        }
        let head = format!(
            "HTTP/1.1 {status}\r\nContent-Type: text/csv\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
            body.len()
        );
        stream.write_all(head.as_bytes()).unwrap();
        stream.write_all(body.as_bytes()).unwrap();
    });
    format!("http://{addr}")
}

#[test]
fn fetched_panel_matches_local_load() {
    let path = fixtures_dir().join("fmcg.csv");
    let config = sector_config("fmcg");
    let body = std::fs::read_to_string(&path).unwrap();
    let url = format!("{}/fmcg.csv", serve_once("200 OK", body.clone()));
    let cache = tempfile::tempdir().unwrap();

    let outcome = fetch_remote_into(&url, &config, cache.path()).unwrap();
    assert_eq!(outcome.panel, load_csv(&path, &config).unwrap());
    assert!(outcome.cache_path.starts_with(cache.path()));
    assert_eq!(std::fs::read_to_string(&outcome.cache_path).unwrap(), body);
    let name = outcome.cache_path.file_name().unwrap().to_str().unwrap();
    assert_eq!(name.len(), 16 + ".csv".len());

    let again = parse_csv(body.as_bytes(), &config).unwrap();
    assert_eq!(again, outcome.panel);
}

#[test]
fn http_error_status_is_reported() {
    let url = format!("{}/missing.csv", serve_once("404 Not Found", "nope".into()));
    let cache = tempfile::tempdir().unwrap();
    let err = fetch_remote_into(&url, &sector_config("it"), cache.path()).unwrap_err();
    assert!(matches!(err, Error::HttpStatus(404)), "{err:?}");
}

#[test]
fn unreachable_host_is_network_unavailable() {
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let cache = tempfile::tempdir().unwrap();
    let err = fetch_remote_into(
        &format!("http://127.0.0.1:{port}/x.csv"),
        &sector_config("it"),
        cache.path(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::NetworkUnavailable(_)), "{err:?}");
}
