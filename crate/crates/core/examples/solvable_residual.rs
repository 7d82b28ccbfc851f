//! Solvable residuals: `Sp_4(2) = S_6` has residual `A_6`, and a Borel
//! subgroup is solvable, so its residual is trivial.
use factorlab::construct::{gens_classical, Family};
use factorlab::gf::Field;
use factorlab::linalg::{GroupElem, MatF};
use factorlab::perm::{solvable_residual, DEFAULT_MAX_DOMAIN};
use factorlab::verify::chain_of;

fn main() {
    let sp = gens_classical(Family::Sp, 4, 2).unwrap();
    let c = sp.closed_chain(0, DEFAULT_MAX_DOMAIN).unwrap();
    let r = solvable_residual(&c).unwrap();
    println!("|Sp(4,2)| = {}, residual order {}", c.order(), r.order());

    // Upper unitriangular matrices in SL_3(3) form a 3-group.
    let k = Field::get(3, 1).unwrap();
    let u: Vec<GroupElem> = [(0, 1), (1, 2)]
        .into_iter()
        .map(|(i, j)| {
            let mut m = MatF::identity(&k, 3);
            m.set(i, j, 1);
            GroupElem::linear(m)
        })
        .collect();
    let uc = chain_of(&k, 3, &u, 0, DEFAULT_MAX_DOMAIN).unwrap();
    println!("|U| = {}, residual order {}", uc.order(), solvable_residual(&uc).unwrap().order());
}
