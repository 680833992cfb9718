#![no_main]

use landau_lab::decay::Trajectory;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(traj) = Trajectory::read_csv(data) else {
        return;
    };
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    assert_eq!(Trajectory::read_csv(buf.as_slice()).unwrap(), traj);
});
