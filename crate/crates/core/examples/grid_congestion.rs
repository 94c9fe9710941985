//! Builds a 5x5 grid, loads it with background traffic and prints the
//! fundamental-diagram speeds and a congested shortest path.

use mobility_pricing::network::{fd_speed, BlendParams, FlowDensityParams, GridSpec, NetworkState};

fn main() -> mobility_pricing::Result<()> {
    let fd = FlowDensityParams::default();
    println!("density  speed(km/h)");
    for k in [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0] {
        println!("{k:>7.1}  {:>10.2}", fd_speed(k, &fd));
    }

    let grid = GridSpec::new(5, 5, 1.0)?;
    let mut net = NetworkState::build(grid, fd)?;
    let centre = grid.coords(grid.node(2, 2));
    let background: Vec<f64> = net
        .links()
        .iter()
        .map(|l| {
            let (x, y) = grid.coords(l.from);
            let r = ((x - centre.0).powi(2) + (y - centre.1).powi(2)).sqrt();
            9.0 * (-r / 1.0).exp()
        })
        .collect();
    net.update(&background, &[], &BlendParams::default())?;

    let (o, d) = (grid.node(2, 0), grid.node(2, 4));
    let path = net.shortest_path(o, d);
    println!("\nfastest {o} -> {d}: {:?}", path.nodes);
    println!("distance {:.1} km, time {:.2} min", path.distance, path.travel_time);
    let straight: f64 = (0..4)
        .map(|c| {
            net.link_state(net.find_link(grid.node(2, c), grid.node(2, c + 1)).unwrap())
                .travel_time
        })
        .sum();
    println!("straight through the centre would take {straight:.2} min");
    Ok(())
}
