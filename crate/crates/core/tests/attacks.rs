use relaxlab::attacks::{
    balanced_query, evaluate_attacks, shadow_config, train_shadow, AttackKind, NnAttackConfig,
};
use relaxlab::data::{five_fold_split, generate_synthetic, SyntheticSpec};
use relaxlab::nn::{Activation, ModelSpec, SgdConfig};
use relaxlab::relaxloss::{train, Method, TrainConfig};

#[test]
fn overfit_target_leaks_membership() {
    let data = generate_synthetic(&SyntheticSpec {
        classes: 5,
        dim: 10,
        per_class: 60,
        class_separation: 1.5,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let split = five_fold_split(data.len(), 3).unwrap();
    let spec = ModelSpec {
        layer_dims: vec![10, 64, 5],
        activation: Activation::Relu,
        dropout_rate: 0.0,
    };
    let cfg = TrainConfig {
        method: Method::Vanilla,
        epochs: 60,
        batch_size: 16,
        sgd: SgdConfig {
            learning_rate: 0.05,
            ..SgdConfig::default()
        },
        batch_seed: 1,
        checkpoint_epochs: Vec::new(),
    };
    let target = train(spec.build(2).unwrap(), &data, split.target_train(), split.target_test(), &cfg)
        .unwrap()
        .model;
    let shadow = train_shadow(&spec, &shadow_config(&cfg, false, 4), &data, &split, 4).unwrap();
    let query = balanced_query(&split, 4);
    let nn = NnAttackConfig {
        epochs: 20,
        ..NnAttackConfig::default()
    };
    let results = evaluate_attacks(&target, &shadow, &data, &split, &query, &AttackKind::ALL, &nn, false).unwrap();
    assert_eq!(results.len(), 8);
    let loss = results.iter().find(|r| r.attack == AttackKind::Loss).unwrap();
    assert!(loss.target_auc > 0.7, "loss attack auc {}", loss.target_auc);
    for r in &results {
        assert!((0.0..=1.0).contains(&r.target_auc));
        assert!((0.0..=1.0).contains(&r.target_accuracy));
        assert!(!r.adaptive);
    }
}
