use std::net::UdpSocket;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use motion_cue::config::PipelineConfig;
use motion_cue::pipeline::{PipelineError, RunReport, StopWhen, UdpServer};
use motion_cue::telemetry::{encode_udp_packet, synth_lap, LapProfile};

fn idle_stop(ms: u64) -> StopWhen {
    StopWhen {
        shutdown: Arc::new(AtomicBool::new(false)),
        idle_timeout: Some(Duration::from_millis(ms)),
    }
}

fn serve_and_send(
    datagrams: Vec<Vec<u8>>,
) -> (Result<RunReport, PipelineError>, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let server = UdpServer::bind(0).unwrap();
    let port = server.port();
    let out = dir.path().to_path_buf();
    let handle =
        thread::spawn(move || server.run(&PipelineConfig::default(), &out, idle_stop(500)));
    let tx = UdpSocket::bind("127.0.0.1:0").unwrap();
    for d in &datagrams {
        tx.send_to(d, ("127.0.0.1", port)).unwrap();
        thread::sleep(Duration::from_micros(300));
    }
    (handle.join().unwrap(), dir)
}

#[test]
fn loopback_lap_accounts_for_every_datagram() {
    let lap = synth_lap(&LapProfile::default(), 4.0, 62.5, 1).unwrap();
    let packets: Vec<Vec<u8>> = lap
        .iter()
        .enumerate()
        .map(|(i, s)| encode_udp_packet(s, i as u32).to_vec())
        .collect();
    let sent = packets.len() as u64;
    let (report, dir) = serve_and_send(packets);
    let report = report.unwrap();
    assert_eq!(
        report.frames + report.overflow_dropped + report.dropped_duplicates + report.malformed,
        sent
    );
    assert_eq!(report.malformed, 0);
    let cues = std::fs::read_to_string(dir.path().join("cues.csv")).unwrap();
    assert_eq!(cues.lines().count() as u64, report.frames + 1);
    assert!(dir.path().join("report.txt").exists());
}

#[test]
fn malformed_datagram_is_counted_and_skipped() {
    let lap = synth_lap(&LapProfile::default(), 1.0, 62.5, 1).unwrap();
    let mut packets: Vec<Vec<u8>> = lap
        .iter()
        .enumerate()
        .map(|(i, s)| encode_udp_packet(s, i as u32).to_vec())
        .collect();
    packets.insert(20, b"not a telemetry packet at all......".to_vec());
    let sent = packets.len() as u64;
    let (report, _dir) = serve_and_send(packets);
    let report = report.unwrap();
    assert_eq!(report.malformed, 1);
    assert_eq!(
        report.frames + report.overflow_dropped + report.dropped_duplicates + 1,
        sent
    );
}

#[test]
fn silent_run_is_an_empty_report_error() {
    let dir = tempfile::tempdir().unwrap();
    let server = UdpServer::bind(0).unwrap();
    let result = server.run(&PipelineConfig::default(), dir.path(), idle_stop(100));
    assert!(matches!(result, Err(PipelineError::EmptyRun)));
}

#[test]
fn busy_port_is_reported() {
    let holder = UdpSocket::bind("0.0.0.0:0").unwrap();
    let port = holder.local_addr().unwrap().port();
    assert!(matches!(UdpServer::bind(port), Err(PipelineError::PortInUse(p)) if p == port));
}
