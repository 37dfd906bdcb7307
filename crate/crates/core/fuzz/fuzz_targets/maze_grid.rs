#![no_main]

use libfuzzer_sys::fuzz_target;
use qd_core::tasks::MazeLayout;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(layout) = MazeLayout::from_grid(text, 8, 0.05) {
        assert!(layout.is_free(layout.start()));
        let fraction = layout.blocked_fraction();
        assert!((0.0..=1.0).contains(&fraction));
        let path = layout.simulate(&[[1.0, 1.0], [-1.0, 0.5], [0.0, -1.0]]);
        assert!(path.iter().all(|&p| layout.is_free(p)));
    }
});
