//! Peak heap use of the streaming detector at 2048x2048.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

use sarcd::pipeline::io::write_pgm;
use sarcd::pipeline::{detect_directory, PipelineConfig};
use sarcd::synth::value_noise_frame;
use sarcd::Point;

struct Counting;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::SeqCst) + layout.size();
            PEAK.fetch_max(now, Ordering::SeqCst);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        CURRENT.fetch_sub(layout.size(), Ordering::SeqCst);
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

const SIDE: usize = 2048;
/// One decoded frame: `SIDE^2` f64 samples.
const FRAME_BYTES: usize = SIDE * SIDE * 8;

fn peak_for(frames: usize, config: &PipelineConfig) -> usize {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    std::fs::create_dir(&input).unwrap();
    for t in 0..frames {
        let f = value_noise_frame(SIDE, SIDE, 3, 150.0, 60.0, 20.0, Point::new(t as f64, 0.0)).unwrap();
        write_pgm(&input.join(format!("f{t:03}.pgm")), &f).unwrap();
    }
    let base = CURRENT.load(Ordering::SeqCst);
    PEAK.store(base, Ordering::SeqCst);
    detect_directory(&input, config, &dir.path().join("out"), true).unwrap();
    PEAK.load(Ordering::SeqCst) - base
}

#[test]
fn peak_memory_is_bounded_and_flat() {
    // A sparse grid keeps the flow solve cheap; buffers are frame-sized either way.
    let mut config = PipelineConfig::default();
    config.flow.spacing = 128;
    config.flow.neighborhood = 3;
    let short = peak_for(3, &config);
    let long = peak_for(6, &config);
    let frames = |b: usize| b as f64 / FRAME_BYTES as f64;
    eprintln!("peak: {:.2} frames (3 inputs), {:.2} frames (6 inputs)", frames(short), frames(long));
    // Streaming: peak does not grow with sequence length.
    assert!(long <= short + FRAME_BYTES / 8, "{short} -> {long}");
    // Three retained frames plus the per-pair scratch of the flow and blob stages.
    assert!(frames(long) <= 8.0, "{:.2} frames", frames(long));
}
