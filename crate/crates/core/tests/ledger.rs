use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spectrust_core::consensus::DifficultyParams;
use spectrust_core::crypto::KeyPair;
use spectrust_core::ids::{AccountId, ContractId};
use spectrust_core::ledger::{
    build_compressed_genesis, compression_authority, export, seal_block, verify_compression, AccountState, Block,
    Chain, ChainConfig, LedgerError, SealRequest, Transaction, TxError, PROTOCOL_CONTRACT,
};
use spectrust_core::par::Execution;
use spectrust_core::payload::Payload;
use spectrust_core::trust::TrustFixed;

const EXEC: Execution = Execution::Sequential;

fn config() -> ChainConfig {
    ChainConfig {
        difficulty: DifficultyParams {
            beta0: 256,
            t0_ms: 1000,
            beta_min: 2,
        },
        compress_every: 100,
    }
}

fn keys(n: usize) -> Vec<KeyPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    (0..n).map(|_| KeyPair::generate(128, &mut rng).unwrap()).collect()
}

fn states(keys: &[KeyPair], tvs: &[f64]) -> BTreeMap<AccountId, AccountState> {
    keys.iter()
        .zip(tvs)
        .map(|(k, &tv)| {
            let mut s = AccountState::new(k.public.account_id(), 1000);
            s.trust.tv = tv;
            (s.account_id, s)
        })
        .collect()
}

fn reward(k: &KeyPair, round: u64) -> Transaction {
    Transaction::contract_output(
        PROTOCOL_CONTRACT,
        &Payload::Reward {
            pk: k.public.account_id(),
            amount: 5,
            round,
        },
    )
}

struct Fixture {
    keys: Vec<KeyPair>,
    chain: Chain,
}

fn fixture() -> Fixture {
    let keys = keys(3);
    let chain = Chain::genesis(config(), &keys[0], states(&keys, &[0.5, 0.7, 0.2]), 1000, EXEC).unwrap();
    Fixture { keys, chain }
}

fn next_block(f: &Fixture, miner: usize, txs: Vec<Transaction>) -> Block {
    let miner_key = &f.keys[miner];
    let trust = f.chain.account(&miner_key.public.account_id()).unwrap().trust.fixed();
    seal_block(
        EXEC,
        SealRequest {
            height: f.chain.next_height(),
            prev_hash: f.chain.tip().hash(),
            timestamp_ms: f.chain.tip().header.timestamp_ms + 100,
            miner: miner_key,
            miner_trust: trust,
            beta: f.chain.next_beta(),
            transactions: txs,
            account_states: f.chain.state().clone(),
            max_trials: 1 << 20,
        },
    )
    .unwrap()
    .0
}

fn mine_again(mut block: Block) -> Block {
    let z = block.header.target();
    let pre = block.header.mining_preimage();
    block.header.nonce = spectrust_core::consensus::mine(&pre, z, 0, 1 << 24).unwrap().nonce;
    block
}

#[test]
fn happy_path_grows_chain() {
    let mut f = fixture();
    let b = next_block(&f, 1, vec![reward(&f.keys[1], 1)]);
    f.chain.append_block(b).unwrap();
    assert_eq!(f.chain.len(), 2);
    assert!(f.chain.verify_links());
}

#[test]
fn rejects_wrong_parent() {
    let mut f = fixture();
    let mut b = next_block(&f, 1, vec![]);
    b.header.prev_hash.0[0] ^= 1;
    assert_eq!(f.chain.append_block(b), Err(LedgerError::BadParent));
}

#[test]
fn rejects_stale_timestamp() {
    let mut f = fixture();
    let mut b = next_block(&f, 1, vec![]);
    b.header.timestamp_ms = f.chain.tip().header.timestamp_ms;
    assert!(matches!(f.chain.append_block(b), Err(LedgerError::BadTimestamp { .. })));
}

#[test]
fn rejects_tampered_transaction_list() {
    let mut f = fixture();
    let mut b = next_block(&f, 1, vec![reward(&f.keys[1], 1), reward(&f.keys[2], 1)]);
    b.transactions.swap(0, 1);
    assert_eq!(
        f.chain.append_block(b.clone()),
        Err(LedgerError::BadRoot("transaction"))
    );
    b.transactions.swap(0, 1);
    b.transactions.pop();
    assert_eq!(f.chain.append_block(b), Err(LedgerError::BadRoot("transaction")));
}

#[test]
fn rejects_tampered_state() {
    let mut f = fixture();
    let mut b = next_block(&f, 1, vec![]);
    b.account_states.values_mut().next().unwrap().balance += 1;
    assert_eq!(f.chain.append_block(b), Err(LedgerError::BadRoot("account state")));
}

#[test]
fn rejects_repeated_transaction() {
    let mut f = fixture();
    let tx = reward(&f.keys[1], 1);
    let b = next_block(&f, 1, vec![tx.clone(), tx]);
    assert_eq!(f.chain.append_block(b), Err(LedgerError::DuplicateTransaction(1)));
}

#[test]
fn rejects_insufficient_work() {
    let mut f = fixture();
    let mut b = next_block(&f, 2, vec![]);
    let z = b.header.target();
    let pre = b.header.mining_preimage();
    b.header.nonce = (0..)
        .find(|&n| spectrust_core::consensus::pow_hash(&pre, n).leading_zero_bits() < z.0)
        .unwrap();
    assert_eq!(f.chain.append_block(b), Err(LedgerError::BadPoW { required: z.0 }));
}

#[test]
fn rejects_inflated_trust_field() {
    let mut f = fixture();
    let mut b = next_block(&f, 2, vec![]);
    b.header.miner_trust = TrustFixed::from_f64(0.99);
    b.header.miner_sig = spectrust_core::crypto::sign(&b.header.signing_bytes(), &f.keys[2]);
    let b = mine_again(b);
    assert_eq!(
        f.chain.append_block(b),
        Err(LedgerError::BadTrustField {
            expected: Some(TrustFixed(2000)),
            found: TrustFixed(9900),
        })
    );
}

#[test]
fn rejects_foreign_miner_signature() {
    let mut f = fixture();
    let mut b = next_block(&f, 1, vec![]);
    b.header.miner_sig = spectrust_core::crypto::sign(&b.header.signing_bytes(), &f.keys[2]);
    let b = mine_again(b);
    assert_eq!(f.chain.append_block(b), Err(LedgerError::BadSignature));
}

#[test]
fn rejects_unauthorized_transaction() {
    let mut f = fixture();
    let forged = Transaction::contract_output(
        ContractId(9),
        &Payload::Reward {
            pk: f.keys[1].public.account_id(),
            amount: 1_000_000,
            round: 1,
        },
    );
    let b = next_block(&f, 1, vec![forged]);
    assert!(matches!(
        f.chain.append_block(b),
        Err(LedgerError::BadTransaction {
            index: 0,
            source: TxError::Unauthorized(_)
        })
    ));
}

#[test]
fn base_difficulty_tracks_block_spacing() {
    let mut f = fixture();
    let start = f.chain.next_beta();
    for gap in [100u64, 3000, 3000] {
        let miner = &f.keys[1];
        let ts = f.chain.tip().header.timestamp_ms + gap;
        f.chain
            .seal_and_append(EXEC, miner, vec![], f.chain.state().clone(), ts)
            .unwrap();
    }
    // each 3 s gap lowers beta by 3 * floor(beta / 128): 256 -> 250 -> 247
    assert_eq!(start, 256);
    assert_eq!(f.chain.next_beta(), 247);

    let mut b = next_block(&f, 1, vec![]);
    b.header.beta = 256;
    b.header.miner_sig = spectrust_core::crypto::sign(&b.header.signing_bytes(), &f.keys[1]);
    let b = mine_again(b);
    assert!(matches!(
        f.chain.append_block(b),
        Err(LedgerError::BadBaseDifficulty { .. })
    ));
}

#[test]
fn export_round_trips_and_revalidates() {
    let mut f = fixture();
    for i in 0..5 {
        let ts = f.chain.tip().header.timestamp_ms + 500;
        let miner = &f.keys[i % 3];
        f.chain
            .seal_and_append(EXEC, miner, vec![reward(miner, i as u64)], f.chain.state().clone(), ts)
            .unwrap();
    }
    let mut buf = Vec::new();
    export::write_jsonl(f.chain.blocks(), &mut buf).unwrap();
    assert_eq!(buf.iter().filter(|&&c| c == b'\n').count(), 6);
    let back = export::import_chain(config(), &buf[..]).unwrap();
    assert_eq!(back.blocks(), f.chain.blocks());

    let text = String::from_utf8(buf).unwrap();
    let tampered = text.replacen("\"balance\":1000", "\"balance\":1001", 1);
    assert!(export::import_chain(config(), tampered.as_bytes()).is_err());
}

#[test]
fn compression_preserves_every_account_byte_for_byte() {
    let mut f = fixture();
    for i in 0..99u64 {
        let mut st = f.chain.state().clone();
        for s in st.values_mut() {
            s.balance += i;
            s.trust.n_right = i;
        }
        let ts = f.chain.tip().header.timestamp_ms + 200;
        f.chain.seal_and_append(EXEC, &f.keys[1], vec![], st, ts).unwrap();
    }
    assert_eq!(f.chain.len(), 100);
    let before: BTreeMap<_, _> = f
        .chain
        .state()
        .iter()
        .map(|(id, s)| (*id, s.canonical_bytes()))
        .collect();

    assert_eq!(
        build_compressed_genesis(&f.chain, &f.keys[0], 0, EXEC).unwrap_err(),
        LedgerError::NotAuthorized(f.keys[0].public.account_id())
    );
    let mut tampered = build_compressed_genesis(&f.chain, &f.keys[1], 0, EXEC).unwrap();
    let victim = *tampered.account_states.keys().next().unwrap();
    tampered.account_states.get_mut(&victim).unwrap().balance += 1;
    assert_eq!(
        verify_compression(&f.chain, &tampered),
        Err(LedgerError::StateMismatch(Some(victim)))
    );

    f.chain.compress(&f.keys[1], 0, EXEC).unwrap();
    assert_eq!(f.chain.len(), 1);
    let after: BTreeMap<_, _> = f
        .chain
        .state()
        .iter()
        .map(|(id, s)| (*id, s.canonical_bytes()))
        .collect();
    assert_eq!(before, after);
    assert_eq!(f.chain.next_beta(), 256);
    assert_eq!(
        build_compressed_genesis(&f.chain, &f.keys[1], 0, EXEC).unwrap_err(),
        LedgerError::NotDue { length: 1, needed: 100 }
    );

    // the compressed chain keeps growing normally
    let ts = f.chain.tip().header.timestamp_ms + 10;
    f.chain
        .seal_and_append(EXEC, &f.keys[2], vec![], f.chain.state().clone(), ts)
        .unwrap();
    assert_eq!(f.chain.len(), 2);
}

#[test]
fn compression_tie_goes_to_smallest_account() {
    let ks = keys(3);
    let st = states(&ks, &[0.8, 0.8, 0.3]);
    let a = ks[0].public.account_id();
    let b = ks[1].public.account_id();
    assert_eq!(compression_authority(&st), Some(a.min(b)));
}
