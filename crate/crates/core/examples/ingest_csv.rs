//! Reads a delimited transaction export, keeping eligible purchases and reporting bad rows.
use kda::repository::Repository;

const FILE: &str = "\
PrCode;PAN;TermId;MerchantID;PosCondition;AffectiveAmount;TrxDate;TrxTime;Settled;TxnGroup
0;6037001;T1;M1;0;120000;2014-03-01T10:15:00;10;true;retail
0;6037001;T1;M1;0;95000;2014-03-02;11;true;retail
0;6037001;T2;M2;0;4000;2014-03-02;12;false;retail
17;6037001;T3;M3;0;50000;2014-03-03;9;true;bill_payment
0;6037001;T1;M1;0;oops;2014-03-04;10;true;retail
";

fn main() -> anyhow::Result<()> {
    let repo = Repository::in_memory();
    let report = repo.import(FILE.as_bytes())?;
    println!("accepted {}, ineligible {}, first id {:?}", report.accepted, report.ineligible, report.first_id);
    for e in &report.rejected {
        println!("line {}: {}", e.line, e.message);
    }
    for tx in repo.history("6037001") {
        println!("{} {} {:02}h {} at {}", tx.id, tx.trx_date, tx.trx_time, tx.affective_amount, tx.merchant_id);
    }
    Ok(())
}
