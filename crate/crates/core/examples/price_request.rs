//! Prices one request offered both as a single and a shared ride, showing the
//! solver iterates and the resulting choice shares.

use mobility_pricing::choice::{choice_probabilities, option_utility, AlternativeUtilities, ChoiceParams, ServiceType};
use mobility_pricing::commands::{direct_option, price, price_text};
use mobility_pricing::fleet::Tariff;

fn main() -> mobility_pricing::Result<()> {
    let choice = ChoiceParams::default();
    let tariff = Tariff::default();
    let (km, minutes) = (6.0, 14.0);
    let single = direct_option(ServiceType::Single, km, minutes + 3.0, &tariff);
    let mut shared = direct_option(ServiceType::Shared, km, minutes + 6.0, &tariff);
    shared.cost = tariff.cost(2.5);
    let (inst, sol) = price(&[single, shared], 20.0, tariff.cost(km), &choice)?;
    print!("{}", price_text(&inst, &sol));

    let offers = [single, shared]
        .iter()
        .zip(&sol.adjustments)
        .map(|(o, &d)| option_utility(o.service, o.fare, d, o.minutes, &choice))
        .collect();
    let original = (inst.rejection_weight - 1.0).ln();
    let p = choice_probabilities(&AlternativeUtilities { offers, original });
    println!(
        "shares: single {:.3} shared {:.3} original {:.3} cancel {:.3}",
        p[0], p[1], p[2], p[3]
    );
    Ok(())
}
