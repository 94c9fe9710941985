//! Shows how a discount or surcharge on a single ride moves the logit
//! choice shares between the offer, the original mode and cancelling.

use mobility_pricing::choice::{
    choice_probabilities, option_utility, outside_utility, AlternativeUtilities, ChoiceParams, ServiceType,
};
use mobility_pricing::fleet::Tariff;

fn main() {
    let params = ChoiceParams::default();
    let tariff = Tariff::default();
    let (km, minutes) = (5.0, 12.0);
    let fare = tariff.fare(ServiceType::Single, km, minutes);
    let outside = outside_utility(18.0, tariff.cost(km), &params);
    println!("fare {fare:.2}; original mode utility {:.3}", outside.original);
    println!("{:>7} {:>8} {:>9} {:>7}", "delta", "offer", "original", "cancel");
    for delta in [-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0] {
        let u = AlternativeUtilities {
            offers: vec![option_utility(ServiceType::Single, fare, delta, minutes, &params)],
            original: outside.original,
        };
        let p = choice_probabilities(&u);
        println!("{delta:>7.2} {:>8.4} {:>9.4} {:>7.4}", p[0], p[1], p[2]);
    }
}
