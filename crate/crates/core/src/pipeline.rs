//! Per-frame orchestration: telemetry -> synthesis -> rig -> IK, with stage
//! timing, CSV traces and a run report.
//!
//! Trace files written to the output directory:
//!
//! | file          | columns |
//! |---------------|---------|
//! | `cues.csv`    | `t, sway_m, tilt_m, jolt_m, vib_m, guard_mode` |
//! | `targets.csv` | `t, g_lat, g_lon, pitch_rad, yaw_rad, surge_m, clamped` |
//! | `joints.csv`  | `t, l_q0.., r_q0.., l_residual_m, r_residual_m, l_converged, r_converged` |
//! | `timing.csv`  | `t, capture_ms, synth_ms, ik_ms, total_ms` |
//! | `report.txt`  | `key = value` summary |
//!
//! Everything except `timing.csv` and `report.txt` is a pure function of the
//! input samples and the configuration.
//!
//! Capture latency is the time spent turning raw input into a sample: line
//! parsing on replay, datagram receipt to dequeue on the live feed, and a
//! packet encode/decode round trip in the bench.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::{SocketAddr, UdpSocket};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_queue::ArrayQueue;
use log::{debug, info, warn};
use statrs::statistics::Statistics;
use thiserror::Error;

use crate::config::{ConfigError, PipelineConfig};
use crate::kinematics::{solve_rod, ArmChain, IkParams, IkSolution, KinematicsError};
use crate::rig::{
    clamp_target, cue_to_chair_target, rod_pose_from_target, ChairTarget, LongitudinalRender,
    RigGeometry, SafetyLimits,
};
use crate::synthesis::{
    blend, CueFrame, SmoothedEngine, SynthEngine, SynthError, SynthMode, ThresholdEngine,
};
use crate::telemetry::{
    decode_udp_packet, encode_udp_packet, parse_log_line, synth_lap, LapProfile, MonotonicGate,
    TelemetryError, TelemetrySample, UDP_PACKET_LEN,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("line {line}: {source}")]
    MalformedLine {
        line: usize,
        #[source]
        source: TelemetryError,
    },
    #[error("cannot read input {path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("trace output: {0}")]
    Output(#[from] std::io::Error),
    #[error("trace output: {0}")]
    Csv(#[from] csv::Error),
    #[error("UDP port {0} is already in use")]
    PortInUse(u16),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("run produced no frames")]
    EmptyRun,
    #[error("{0}")]
    InvalidArgument(String),
}

impl PipelineError {
    /// Process exit code: 1 for configuration problems, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            _ => 2,
        }
    }
}

/// Wall-clock cost of one frame, in milliseconds.
///
/// `total_ms` is capture plus the span from synthesis start to IK end, so it
/// also covers the rig mapping that has no column of its own.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTiming {
    pub capture_ms: f64,
    pub synth_ms: f64,
    pub ik_ms: f64,
    pub total_ms: f64,
}

/// Everything the pipeline emits for one admitted sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub sample: TelemetrySample,
    pub cue: CueFrame,
    pub target: ChairTarget,
    /// Commanded joints: the solve result, or the last converged vector when
    /// the solve missed tolerance.
    pub q_left: Vec<f64>,
    pub q_right: Vec<f64>,
    pub left: IkSolution,
    pub right: IkSolution,
    pub timing: StageTiming,
}

impl FrameOutput {
    pub fn unreachable(&self) -> bool {
        self.left.unreachable() || self.right.unreachable()
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

pub struct Pipeline {
    engine: SynthEngine,
    render: LongitudinalRender,
    geometry: RigGeometry,
    limits: SafetyLimits,
    ik: IkParams,
    left: ArmChain,
    right: ArmChain,
    // warm start for the next solve
    q_left: Vec<f64>,
    q_right: Vec<f64>,
    // last converged command
    good_left: Vec<f64>,
    good_right: Vec<f64>,
    gate: MonotonicGate,
}

impl Pipeline {
    pub fn new(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let (left, right) = cfg.chains()?;
        let (engine, render) = match cfg.pipeline.mode {
            SynthMode::Smoothed => (
                SynthEngine::Smoothed(SmoothedEngine::new(
                    cfg.smoothed.clone(),
                    cfg.guard.clone(),
                )?),
                LongitudinalRender::Pitch,
            ),
            SynthMode::Threshold => (
                SynthEngine::Threshold(ThresholdEngine::new(
                    cfg.threshold.clone(),
                    cfg.guard.clone(),
                )?),
                LongitudinalRender::Surge,
            ),
        };
        let rest = rod_pose_from_target(&ChairTarget::default(), &cfg.geometry);
        let home = solve_rod(
            &left,
            &right,
            &rest,
            (&left.home_posture(), &right.home_posture()),
            &cfg.ik,
        )?;
        if home.left.unreachable() || home.right.unreachable() {
            warn!(
                "rest pose not reachable (residuals {:.4} m, {:.4} m); check geometry.rod_midpoint",
                home.left.residual_m, home.right.residual_m
            );
        }
        Ok(Self {
            engine,
            render,
            geometry: cfg.geometry.clone(),
            limits: cfg.limits.clone(),
            ik: cfg.ik.clone(),
            left,
            right,
            q_left: home.left.q.clone(),
            q_right: home.right.q.clone(),
            good_left: home.left.q,
            good_right: home.right.q,
            gate: MonotonicGate::new(),
        })
    }

    pub fn mode(&self) -> SynthMode {
        self.engine.mode()
    }

    pub fn dof(&self) -> (usize, usize) {
        (self.left.dof(), self.right.dof())
    }

    /// Samples dropped so far for non-increasing timestamps.
    pub fn dropped_duplicates(&self) -> u64 {
        self.gate.dropped()
    }

    /// Synthesis and rig mapping only. `None` if the sample was dropped as a
    /// duplicate timestamp.
    pub fn target_step(
        &mut self,
        sample: &TelemetrySample,
    ) -> Result<Option<(CueFrame, ChairTarget)>, PipelineError> {
        if !self.gate.admit(sample) {
            return Ok(None);
        }
        let cue = self.engine.step(sample)?;
        let (pitch_cue, yaw_cue) = blend(&cue);
        let target = clamp_target(
            cue_to_chair_target(pitch_cue, yaw_cue, &self.geometry, self.render),
            &self.limits,
        );
        Ok(Some((cue, target)))
    }

    /// Runs one sample through every stage.
    pub fn process(
        &mut self,
        sample: &TelemetrySample,
        capture: Duration,
    ) -> Result<Option<FrameOutput>, PipelineError> {
        let start = Instant::now();
        let Some((cue, target)) = self.target_step(sample)? else {
            return Ok(None);
        };
        let synth_done = Instant::now();
        let rod = rod_pose_from_target(&target, &self.geometry);
        let ik_start = Instant::now();
        let sol = solve_rod(
            &self.left,
            &self.right,
            &rod,
            (&self.q_left, &self.q_right),
            &self.ik,
        )?;
        let end = Instant::now();

        self.q_left.clone_from(&sol.left.q);
        self.q_right.clone_from(&sol.right.q);
        if sol.left.converged {
            self.good_left.clone_from(&sol.left.q);
        }
        if sol.right.converged {
            self.good_right.clone_from(&sol.right.q);
        }
        if sol.left.unreachable() || sol.right.unreachable() {
            debug!(
                "t={} IK missed tolerance: left {:.4} m, right {:.4} m",
                sample.t, sol.left.residual_m, sol.right.residual_m
            );
        }
        Ok(Some(FrameOutput {
            sample: *sample,
            cue,
            target,
            q_left: self.good_left.clone(),
            q_right: self.good_right.clone(),
            left: sol.left,
            right: sol.right,
            timing: StageTiming {
                capture_ms: ms(capture),
                synth_ms: ms(synth_done - start),
                ik_ms: ms(end - ik_start),
                total_ms: ms(capture) + ms(end - start),
            },
        }))
    }
}

// ── Report ──────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageStats {
    pub mean_ms: f64,
    /// Sample standard deviation; zero for a single frame.
    pub sd_ms: f64,
}

impl StageStats {
    pub fn from_samples(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let sd_ms = if xs.len() > 1 { xs.std_dev() } else { 0.0 };
        Self {
            mean_ms: xs.mean(),
            sd_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    pub mode: SynthMode,
    pub frames: u64,
    pub clamped_frames: u64,
    pub unreachable_frames: u64,
    /// Non-increasing timestamps dropped before synthesis.
    pub dropped_duplicates: u64,
    /// Datagrams that failed to decode.
    pub malformed: u64,
    /// Samples evicted from the full ingestion queue.
    pub overflow_dropped: u64,
    pub capture: StageStats,
    pub synth: StageStats,
    pub ik: StageStats,
    pub total: StageStats,
}

impl std::fmt::Display for RunReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "mode = {}",
            match self.mode {
                SynthMode::Smoothed => "smoothed",
                SynthMode::Threshold => "threshold",
            }
        )?;
        writeln!(f, "frames = {}", self.frames)?;
        writeln!(f, "clamped_frames = {}", self.clamped_frames)?;
        writeln!(f, "unreachable_frames = {}", self.unreachable_frames)?;
        writeln!(f, "dropped_duplicates = {}", self.dropped_duplicates)?;
        writeln!(f, "malformed = {}", self.malformed)?;
        writeln!(f, "overflow_dropped = {}", self.overflow_dropped)?;
        for (name, s) in [
            ("capture", self.capture),
            ("synth", self.synth),
            ("ik", self.ik),
            ("total", self.total),
        ] {
            writeln!(f, "{name}_mean_ms = {}", s.mean_ms)?;
            writeln!(f, "{name}_sd_ms = {}", s.sd_ms)?;
        }
        Ok(())
    }
}

/// Accumulates per-frame outputs into a [`RunReport`].
#[derive(Debug, Default)]
pub struct ReportBuilder {
    report: RunReport,
    capture: Vec<f64>,
    synth: Vec<f64>,
    ik: Vec<f64>,
    total: Vec<f64>,
}

impl ReportBuilder {
    pub fn new(mode: SynthMode) -> Self {
        Self {
            report: RunReport {
                mode,
                ..RunReport::default()
            },
            ..Self::default()
        }
    }

    pub fn record(&mut self, frame: &FrameOutput) {
        let r = &mut self.report;
        r.frames += 1;
        r.clamped_frames += u64::from(frame.target.clamped);
        r.unreachable_frames += u64::from(frame.unreachable());
        self.capture.push(frame.timing.capture_ms);
        self.synth.push(frame.timing.synth_ms);
        self.ik.push(frame.timing.ik_ms);
        self.total.push(frame.timing.total_ms);
    }

    pub fn finish(
        mut self,
        dropped_duplicates: u64,
        malformed: u64,
        overflow_dropped: u64,
    ) -> Result<RunReport, PipelineError> {
        if self.report.frames == 0 {
            return Err(PipelineError::EmptyRun);
        }
        let r = &mut self.report;
        r.dropped_duplicates = dropped_duplicates;
        r.malformed = malformed;
        r.overflow_dropped = overflow_dropped;
        r.capture = StageStats::from_samples(&self.capture);
        r.synth = StageStats::from_samples(&self.synth);
        r.ik = StageStats::from_samples(&self.ik);
        r.total = StageStats::from_samples(&self.total);
        Ok(self.report)
    }
}

// ── Traces ──────────────────────────────────────────────────────────────────

/// Shortest round-trip text; negative zero prints as `0`.
fn num(x: f64) -> String {
    (x + 0.0).to_string()
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Incremental CSV writer for the four per-frame traces.
pub struct TraceWriter {
    dir: PathBuf,
    cues: csv::Writer<BufWriter<File>>,
    targets: csv::Writer<BufWriter<File>>,
    joints: csv::Writer<BufWriter<File>>,
    timing: csv::Writer<BufWriter<File>>,
}

impl TraceWriter {
    pub fn create(dir: &Path, dof: (usize, usize)) -> Result<Self, PipelineError> {
        std::fs::create_dir_all(dir)?;
        let open = |name: &str| -> Result<csv::Writer<BufWriter<File>>, PipelineError> {
            Ok(csv::Writer::from_writer(BufWriter::new(File::create(
                dir.join(name),
            )?)))
        };
        let mut w = Self {
            dir: dir.to_path_buf(),
            cues: open("cues.csv")?,
            targets: open("targets.csv")?,
            joints: open("joints.csv")?,
            timing: open("timing.csv")?,
        };
        w.cues
            .write_record(["t", "sway_m", "tilt_m", "jolt_m", "vib_m", "guard_mode"])?;
        w.targets.write_record([
            "t",
            "g_lat",
            "g_lon",
            "pitch_rad",
            "yaw_rad",
            "surge_m",
            "clamped",
        ])?;
        let mut header = vec!["t".to_string()];
        header.extend((0..dof.0).map(|i| format!("l_q{i}")));
        header.extend((0..dof.1).map(|i| format!("r_q{i}")));
        header.extend(
            ["l_residual_m", "r_residual_m", "l_converged", "r_converged"].map(String::from),
        );
        w.joints.write_record(&header)?;
        w.timing
            .write_record(["t", "capture_ms", "synth_ms", "ik_ms", "total_ms"])?;
        Ok(w)
    }

    pub fn write(&mut self, f: &FrameOutput) -> Result<(), PipelineError> {
        let t = num(f.sample.t);
        let c = &f.cue;
        self.cues.write_record([
            t.clone(),
            num(c.sway_m),
            num(c.tilt_m),
            num(c.jolt_m),
            num(c.vib_m),
            c.guard_mode.to_string(),
        ])?;
        let g = &f.target;
        self.targets.write_record([
            t.clone(),
            num(f.sample.g_lat),
            num(f.sample.g_lon),
            num(g.pitch_rad),
            num(g.yaw_rad),
            num(g.surge_m),
            flag(g.clamped).to_string(),
        ])?;
        let mut row = vec![t.clone()];
        row.extend(f.q_left.iter().chain(&f.q_right).map(|&x| num(x)));
        row.push(num(f.left.residual_m));
        row.push(num(f.right.residual_m));
        row.push(flag(f.left.converged).to_string());
        row.push(flag(f.right.converged).to_string());
        self.joints.write_record(&row)?;
        let s = &f.timing;
        self.timing.write_record([
            t,
            num(s.capture_ms),
            num(s.synth_ms),
            num(s.ik_ms),
            num(s.total_ms),
        ])?;
        Ok(())
    }

    /// Flushes the traces and writes `report.txt`.
    pub fn finish(mut self, report: Option<&RunReport>) -> Result<(), PipelineError> {
        self.cues.flush()?;
        self.targets.flush()?;
        self.joints.flush()?;
        self.timing.flush()?;
        if let Some(r) = report {
            let mut out = BufWriter::new(File::create(self.dir.join("report.txt"))?);
            write!(out, "{r}")?;
            out.flush()?;
        }
        Ok(())
    }
}

// ── Entry points ────────────────────────────────────────────────────────────

/// Runs pre-parsed samples through a fresh pipeline, keeping every frame.
pub fn run_samples(
    cfg: &PipelineConfig,
    samples: &[TelemetrySample],
) -> Result<(Vec<FrameOutput>, RunReport), PipelineError> {
    let mut pipe = Pipeline::new(cfg)?;
    let mut report = ReportBuilder::new(pipe.mode());
    let mut frames = Vec::with_capacity(samples.len());
    for s in samples {
        if let Some(f) = pipe.process(s, Duration::ZERO)? {
            report.record(&f);
            frames.push(f);
        }
    }
    let report = report.finish(pipe.dropped_duplicates(), 0, 0)?;
    Ok((frames, report))
}

/// Replays a JSON-lines log, writing traces and `report.txt` into `out_dir`.
pub fn run_replay(
    log_path: &Path,
    cfg: &PipelineConfig,
    out_dir: &Path,
) -> Result<RunReport, PipelineError> {
    let text = std::fs::read_to_string(log_path).map_err(|source| PipelineError::Input {
        path: log_path.to_path_buf(),
        source,
    })?;
    let mut pipe = Pipeline::new(cfg)?;
    let mut traces = TraceWriter::create(out_dir, pipe.dof())?;
    let mut report = ReportBuilder::new(pipe.mode());
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_start = Instant::now();
        let sample = parse_log_line(line).map_err(|source| PipelineError::MalformedLine {
            line: i + 1,
            source,
        })?;
        let capture = parse_start.elapsed();
        if let Some(f) = pipe.process(&sample, capture)? {
            traces.write(&f)?;
            report.record(&f);
        }
    }
    let report = report.finish(pipe.dropped_duplicates(), 0, 0);
    traces.finish(report.as_ref().ok())?;
    let report = report?;
    info!(
        "replayed {} frames, total {:.3} ms mean",
        report.frames, report.total.mean_ms
    );
    Ok(report)
}

/// Full-pipeline benchmark over `n_frames` of the default synthetic lap.
pub fn bench(cfg: &PipelineConfig, n_frames: usize) -> Result<RunReport, PipelineError> {
    if n_frames < 100 {
        return Err(PipelineError::InvalidArgument(format!(
            "bench needs at least 100 frames, got {n_frames}"
        )));
    }
    let rate = crate::telemetry::DEFAULT_RATE_HZ;
    let lap = synth_lap(
        &LapProfile::default(),
        (n_frames + 1) as f64 / rate,
        rate,
        1,
    )
    .map_err(|e| PipelineError::InvalidArgument(e.to_string()))?;
    let mut pipe = Pipeline::new(cfg)?;
    let mut report = ReportBuilder::new(pipe.mode());
    for (seq, s) in lap.iter().take(n_frames).enumerate() {
        let capture_start = Instant::now();
        let pkt = encode_udp_packet(s, seq as u32);
        let sample = decode_udp_packet(&pkt)
            .map_err(|e| PipelineError::InvalidArgument(e.to_string()))?
            .sample;
        let capture = capture_start.elapsed();
        if let Some(f) = pipe.process(&sample, capture)? {
            report.record(&f);
        }
    }
    report.finish(pipe.dropped_duplicates(), 0, 0)
}

// ── Live UDP ────────────────────────────────────────────────────────────────

/// When a live run stops.
#[derive(Debug, Clone)]
pub struct StopWhen {
    /// Set externally (e.g. by a signal handler) to end the run.
    pub shutdown: Arc<AtomicBool>,
    /// End the run after this long without a datagram.
    pub idle_timeout: Option<Duration>,
}

impl StopWhen {
    pub fn on_flag(shutdown: Arc<AtomicBool>) -> Self {
        Self {
            shutdown,
            idle_timeout: None,
        }
    }
}

struct Received {
    sample: TelemetrySample,
    arrived: Instant,
    decode: Duration,
}

#[derive(Default)]
struct Counters {
    malformed: AtomicU64,
    overflow: AtomicU64,
    last_rx_nanos: AtomicU64,
}

/// A bound telemetry socket, ready to run.
pub struct UdpServer {
    socket: UdpSocket,
    port: u16,
}

impl UdpServer {
    /// Binds all interfaces on `port`; 0 picks a free port.
    pub fn bind(port: u16) -> Result<Self, PipelineError> {
        let socket = UdpSocket::bind(("0.0.0.0", port)).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AddrInUse {
                PipelineError::PortInUse(port)
            } else {
                PipelineError::Output(e)
            }
        })?;
        let port = socket.local_addr()?.port();
        Ok(Self { socket, port })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    /// Receives on a background thread into a bounded drop-oldest queue and
    /// processes frames until stopped. Traces are written as frames arrive.
    pub fn run(
        self,
        cfg: &PipelineConfig,
        out_dir: &Path,
        stop: StopWhen,
    ) -> Result<RunReport, PipelineError> {
        let mut pipe = Pipeline::new(cfg)?;
        let mut traces = TraceWriter::create(out_dir, pipe.dof())?;
        let mut report = ReportBuilder::new(pipe.mode());

        let queue = Arc::new(ArrayQueue::<Received>::new(cfg.pipeline.queue_capacity));
        let counters = Arc::new(Counters::default());
        let done = Arc::new(AtomicBool::new(false));
        let epoch = Instant::now();
        self.socket
            .set_read_timeout(Some(Duration::from_millis(20)))?;
        info!("listening for telemetry on UDP port {}", self.port);

        let receiver = {
            let (queue, counters, done) = (queue.clone(), counters.clone(), done.clone());
            let socket = self.socket;
            thread::spawn(move || {
                let mut buf = [0u8; 2 * UDP_PACKET_LEN];
                while !done.load(Ordering::Acquire) {
                    let n = match socket.recv(&mut buf) {
                        Ok(n) => n,
                        Err(e)
                            if matches!(
                                e.kind(),
                                std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
                            ) =>
                        {
                            continue
                        }
                        Err(e) => {
                            warn!("UDP receive failed: {e}");
                            continue;
                        }
                    };
                    let arrived = Instant::now();
                    counters
                        .last_rx_nanos
                        .store((arrived - epoch).as_nanos() as u64, Ordering::Release);
                    match decode_udp_packet(&buf[..n]) {
                        Ok(pkt) => {
                            let item = Received {
                                sample: pkt.sample,
                                arrived,
                                decode: arrived.elapsed(),
                            };
                            if queue.force_push(item).is_some() {
                                counters.overflow.fetch_add(1, Ordering::Relaxed);
                            }
                        }
                        Err(e) => {
                            warn!("dropping datagram: {e}");
                            counters.malformed.fetch_add(1, Ordering::Relaxed);
                        }
                    }
                }
            })
        };

        let should_stop = || {
            if stop.shutdown.load(Ordering::Acquire) {
                return true;
            }
            stop.idle_timeout.is_some_and(|idle| {
                let last = Duration::from_nanos(counters.last_rx_nanos.load(Ordering::Acquire));
                epoch.elapsed().saturating_sub(last) > idle
            })
        };
        let mut result = Ok(());
        loop {
            match queue.pop() {
                Some(item) => {
                    // receipt to dequeue, including decode and queue dwell
                    let capture = item.arrived.elapsed().max(item.decode);
                    match pipe.process(&item.sample, capture) {
                        Ok(Some(f)) => {
                            report.record(&f);
                            if let Err(e) = traces.write(&f) {
                                result = Err(e);
                                break;
                            }
                        }
                        Ok(None) => {}
                        Err(e) => {
                            result = Err(e);
                            break;
                        }
                    }
                }
                None if should_stop() => break,
                None => thread::sleep(Duration::from_micros(200)),
            }
        }
        done.store(true, Ordering::Release);
        let _ = receiver.join();
        result?;
        // anything queued after the stop decision
        while let Some(item) = queue.pop() {
            let capture = item.arrived.elapsed().max(item.decode);
            if let Some(f) = pipe.process(&item.sample, capture)? {
                report.record(&f);
                traces.write(&f)?;
            }
        }

        let report = report.finish(
            pipe.dropped_duplicates(),
            counters.malformed.load(Ordering::Relaxed),
            counters.overflow.load(Ordering::Relaxed),
        );
        traces.finish(report.as_ref().ok())?;
        report
    }
}

/// Binds `port` and serves until `stop` fires.
pub fn run_udp(
    port: u16,
    cfg: &PipelineConfig,
    out_dir: &Path,
    stop: StopWhen,
) -> Result<RunReport, PipelineError> {
    UdpServer::bind(port)?.run(cfg, out_dir, stop)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lap(profile: LapProfile, duration: f64) -> Vec<TelemetrySample> {
        synth_lap(&profile, duration, 62.5, 1).unwrap()
    }

    #[test]
    fn one_frame_per_sample() {
        let samples = lap(LapProfile::default(), 10.0);
        assert_eq!(samples.len(), 625);
        let (frames, report) = run_samples(&PipelineConfig::default(), &samples).unwrap();
        assert_eq!(frames.len(), 625);
        assert_eq!(report.frames, 625);
    }

    #[test]
    fn zero_lap_is_quiet() {
        let samples = lap(LapProfile::zero(), 4.0);
        let (frames, report) = run_samples(&PipelineConfig::default(), &samples).unwrap();
        assert_eq!(report.clamped_frames, 0);
        assert_eq!(report.unreachable_frames, 0);
        for f in &frames {
            assert_eq!(
                (f.cue.sway_m, f.cue.tilt_m, f.cue.jolt_m, f.cue.vib_m),
                (0.0, 0.0, 0.0, 0.0)
            );
            assert_eq!(f.target, ChairTarget::default());
        }
    }

    #[test]
    fn duplicates_are_counted_not_processed() {
        let mut samples = lap(LapProfile::default(), 2.0);
        let dup = samples[10];
        samples.insert(11, dup);
        let (frames, report) = run_samples(&PipelineConfig::default(), &samples).unwrap();
        assert_eq!(frames.len() + 1, samples.len());
        assert_eq!(report.dropped_duplicates, 1);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            run_samples(&PipelineConfig::default(), &[]),
            Err(PipelineError::EmptyRun)
        ));
    }

    #[test]
    fn soft_failure_repeats_last_good_command() {
        // a rod far outside both arms' reach
        let mut cfg = PipelineConfig::default();
        let samples = lap(LapProfile::default(), 1.0);
        let mut pipe = Pipeline::new(&cfg).unwrap();
        let first = pipe.process(&samples[0], Duration::ZERO).unwrap().unwrap();
        assert!(!first.unreachable());
        cfg.geometry.rod_midpoint = [2.0, 0.0, 0.0];
        pipe.geometry = cfg.geometry.clone();
        let miss = pipe.process(&samples[1], Duration::ZERO).unwrap().unwrap();
        assert!(miss.unreachable());
        assert!(miss.left.residual_m > 1.0);
        assert_eq!(miss.q_left, first.q_left);
        assert_eq!(miss.q_right, first.q_right);
    }

    #[test]
    fn timing_is_consistent() {
        let samples = lap(LapProfile::default(), 2.0);
        let mut pipe = Pipeline::new(&PipelineConfig::default()).unwrap();
        for s in &samples {
            let f = pipe.process(s, Duration::from_micros(5)).unwrap().unwrap();
            let t = f.timing;
            assert!(t.capture_ms >= 0.0 && t.synth_ms >= 0.0 && t.ik_ms >= 0.0);
            assert!(t.total_ms >= t.capture_ms.max(t.synth_ms).max(t.ik_ms));
            assert!(t.total_ms <= t.capture_ms + t.synth_ms + t.ik_ms + 1.0);
        }
    }

    #[test]
    fn stage_stats() {
        let s = StageStats::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean_ms, 2.5);
        assert!((s.sd_ms - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(StageStats::from_samples(&[7.0]).sd_ms, 0.0);
    }

    #[test]
    fn bench_rejects_short_runs() {
        assert!(matches!(
            bench(&PipelineConfig::default(), 99),
            Err(PipelineError::InvalidArgument(_))
        ));
    }
}
