//! The three recognizer architectures, each exposing loss-and-gradients
//! over an explicit parameter set so finite-difference checks can probe
//! the exact training path.

use super::inputs::NetInputs;
use super::LearnedError;
use crate::features::{ChannelStack, STACK_CHANNELS};
use crate::neuralnet::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, dropout_backward,
    dropout_forward, he_uniform_init, lstm_backward, lstm_forward, maxpool2x2_backward,
    maxpool2x2_forward, relu_backward, relu_forward, softmax_xent, DropoutMode, Grads, LstmCache,
    ParamSet, Tensor,
};
use crate::symbolic::Posterior;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest flattened per-frame encoding the spatial network accepts.
pub const MAX_FRAME_FLAT: usize = 65_536;

const OBS_INPUT: usize = 2;

/// Architecture identifier; doubles as the input-builder selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NetKind {
    GcNet,
    SdNet,
    LstmObs,
    Stdnn,
}

impl NetKind {
    pub fn id(self) -> &'static str {
        match self {
            NetKind::GcNet => "gc-net",
            NetKind::SdNet => "sd-net",
            NetKind::LstmObs => "lstm-obs",
            NetKind::Stdnn => "stdnn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gc-net" => Some(NetKind::GcNet),
            "sd-net" => Some(NetKind::SdNet),
            "lstm-obs" => Some(NetKind::LstmObs),
            "stdnn" => Some(NetKind::Stdnn),
            _ => None,
        }
    }
}

impl std::fmt::Display for NetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

/// How dropout behaves for one example evaluation.
#[derive(Debug, Clone, Copy)]
pub struct DropoutPlan {
    pub rate: f64,
    pub mode: DropoutMode,
    pub seed: u64,
}

impl DropoutPlan {
    pub fn eval() -> Self {
        DropoutPlan { rate: 0.0, mode: DropoutMode::Eval, seed: 0 }
    }

    pub fn train(rate: f64, seed: u64) -> Self {
        DropoutPlan { rate, mode: DropoutMode::Train, seed }
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

fn sequence_inputs<'a>(
    inputs: &'a NetInputs,
    kind: NetKind,
) -> Result<(&'a [Vec<f64>], Option<&'a [Vec<f64>]>), LearnedError> {
    match inputs {
        NetInputs::Sequence { coords, features } => Ok((coords, features.as_deref())),
        NetInputs::Frames(_) => Err(LearnedError::WrongInputs { kind: kind.id() }),
    }
}

/// Two recurrent encoders, one over raw coordinates and one over per-goal
/// plan derivatives, concatenated into a shared classification head.
#[derive(Debug, Clone)]
pub struct DualEncoderNet {
    pub kind: NetKind,
    goal_count: usize,
    hidden: usize,
    pub params: ParamSet,
}

struct DualCache {
    obs: LstmCache,
    feat: LstmCache,
    dropped: Tensor,
    mask: Tensor,
}

impl DualEncoderNet {
    /// Standard configuration: both encoders 64 units wide.
    pub fn new(kind: NetKind, goal_count: usize, seed: u64) -> Self {
        Self::with_hidden(kind, goal_count, 64, seed)
    }

    pub fn with_hidden(kind: NetKind, goal_count: usize, hidden: usize, seed: u64) -> Self {
        assert!(
            matches!(kind, NetKind::GcNet | NetKind::SdNet),
            "dual encoder kinds are the feature-fed ones"
        );
        assert!(goal_count >= 1 && hidden >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        params.insert("obs.wx", he_uniform_init(&[OBS_INPUT, 4 * hidden], OBS_INPUT, &mut rng));
        params.insert("obs.wh", he_uniform_init(&[hidden, 4 * hidden], hidden, &mut rng));
        params.insert("obs.b", Tensor::zeros(&[4 * hidden]));
        params.insert("feat.wx", he_uniform_init(&[goal_count, 4 * hidden], goal_count, &mut rng));
        params.insert("feat.wh", he_uniform_init(&[hidden, 4 * hidden], hidden, &mut rng));
        params.insert("feat.b", Tensor::zeros(&[4 * hidden]));
        params.insert("head.w", he_uniform_init(&[2 * hidden, goal_count], 2 * hidden, &mut rng));
        params.insert("head.b", Tensor::zeros(&[goal_count]));
        DualEncoderNet { kind, goal_count, hidden, params }
    }

    pub fn goal_count(&self) -> usize {
        self.goal_count
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn run(
        &self,
        params: &ParamSet,
        inputs: &NetInputs,
        plan: &DropoutPlan,
    ) -> Result<(Vec<f64>, DualCache), LearnedError> {
        let (coords, features) = sequence_inputs(inputs, self.kind)?;
        let features = features.ok_or(LearnedError::MissingFields { kind: self.kind.id() })?;
        if features.iter().any(|row| row.len() != self.goal_count) {
            return Err(LearnedError::GoalCountMismatch {
                expected: self.goal_count,
                got: features.first().map_or(0, Vec::len),
            });
        }
        let obs = lstm_forward(coords, params.get("obs.wx"), params.get("obs.wh"), params.get("obs.b"))?;
        let feat =
            lstm_forward(features, params.get("feat.wx"), params.get("feat.wh"), params.get("feat.b"))?;
        let mut joint = obs.final_hidden().to_vec();
        joint.extend_from_slice(feat.final_hidden());
        let concat = Tensor::from_vec(&[1, 2 * self.hidden], joint);
        let (dropped, mask) = dropout_forward(&concat, plan.rate, plan.mode, &mut plan.rng());
        let logits = dense_forward(&dropped, params.get("head.w"), params.get("head.b"))?;
        Ok((logits.data().to_vec(), DualCache { obs, feat, dropped, mask }))
    }

    fn grads(
        &self,
        params: &ParamSet,
        cache: &DualCache,
        dlogits: &[f64],
    ) -> Grads {
        let dy = Tensor::from_vec(&[1, self.goal_count], dlogits.to_vec());
        let (ddropped, dw, db) = dense_backward(&cache.dropped, params.get("head.w"), &dy);
        let dconcat = dropout_backward(&ddropped, &cache.mask);
        let (dh_obs, dh_feat) = dconcat.data().split_at(self.hidden);
        let obs_g = lstm_backward(params.get("obs.wx"), params.get("obs.wh"), &cache.obs, dh_obs);
        let feat_g =
            lstm_backward(params.get("feat.wx"), params.get("feat.wh"), &cache.feat, dh_feat);

        let mut grads = Grads::new();
        grads.add("obs.wx", &obs_g.dwx);
        grads.add("obs.wh", &obs_g.dwh);
        grads.add("obs.b", &obs_g.db);
        grads.add("feat.wx", &feat_g.dwx);
        grads.add("feat.wh", &feat_g.dwh);
        grads.add("feat.b", &feat_g.db);
        grads.add("head.w", &dw);
        grads.add("head.b", &db);
        grads
    }
}

/// Single recurrent encoder over raw coordinates; no planning input at all.
#[derive(Debug, Clone)]
pub struct BaselineNet {
    goal_count: usize,
    hidden: usize,
    pub params: ParamSet,
}

struct BaselineCache {
    obs: LstmCache,
    dropped: Tensor,
    mask: Tensor,
}

impl BaselineNet {
    pub fn new(goal_count: usize, seed: u64) -> Self {
        Self::with_hidden(goal_count, 64, seed)
    }

    pub fn with_hidden(goal_count: usize, hidden: usize, seed: u64) -> Self {
        assert!(goal_count >= 1 && hidden >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        params.insert("obs.wx", he_uniform_init(&[OBS_INPUT, 4 * hidden], OBS_INPUT, &mut rng));
        params.insert("obs.wh", he_uniform_init(&[hidden, 4 * hidden], hidden, &mut rng));
        params.insert("obs.b", Tensor::zeros(&[4 * hidden]));
        params.insert("head.w", he_uniform_init(&[hidden, goal_count], hidden, &mut rng));
        params.insert("head.b", Tensor::zeros(&[goal_count]));
        BaselineNet { goal_count, hidden, params }
    }

    pub fn goal_count(&self) -> usize {
        self.goal_count
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn run(
        &self,
        params: &ParamSet,
        inputs: &NetInputs,
        plan: &DropoutPlan,
    ) -> Result<(Vec<f64>, BaselineCache), LearnedError> {
        let (coords, _) = sequence_inputs(inputs, NetKind::LstmObs)?;
        let obs = lstm_forward(coords, params.get("obs.wx"), params.get("obs.wh"), params.get("obs.b"))?;
        let hidden = Tensor::from_vec(&[1, self.hidden], obs.final_hidden().to_vec());
        let (dropped, mask) = dropout_forward(&hidden, plan.rate, plan.mode, &mut plan.rng());
        let logits = dense_forward(&dropped, params.get("head.w"), params.get("head.b"))?;
        Ok((logits.data().to_vec(), BaselineCache { obs, dropped, mask }))
    }

    fn grads(&self, params: &ParamSet, cache: &BaselineCache, dlogits: &[f64]) -> Grads {
        let dy = Tensor::from_vec(&[1, self.goal_count], dlogits.to_vec());
        let (ddropped, dw, db) = dense_backward(&cache.dropped, params.get("head.w"), &dy);
        let dhidden = dropout_backward(&ddropped, &cache.mask);
        let obs_g =
            lstm_backward(params.get("obs.wx"), params.get("obs.wh"), &cache.obs, dhidden.data());
        let mut grads = Grads::new();
        grads.add("obs.wx", &obs_g.dwx);
        grads.add("obs.wh", &obs_g.dwh);
        grads.add("obs.b", &obs_g.db);
        grads.add("head.w", &dw);
        grads.add("head.b", &db);
        grads
    }
}

/// Shared per-frame convolutional encoder followed by a recurrent layer
/// over the encoded frames and a classification head.
#[derive(Debug, Clone)]
pub struct SpatioTemporalNet {
    goal_count: usize,
    height: usize,
    width: usize,
    channels: [usize; 3],
    hidden: usize,
    pooled: bool,
    pub params: ParamSet,
}

struct FrameCache {
    x: Tensor,
    z1: Tensor,
    a1: Tensor,
    p1: Tensor,
    arg1: Vec<usize>,
    z2: Tensor,
    a2: Tensor,
    p2: Tensor,
    arg2: Vec<usize>,
    z3: Tensor,
}

struct SpatialCache {
    frames: Vec<FrameCache>,
    temporal: LstmCache,
    dropped: Tensor,
    mask: Tensor,
}

impl SpatioTemporalNet {
    /// Standard configuration: 16/32/64 filters, 256 recurrent units,
    /// 2x2 pooling after the first two stages once either side exceeds 16.
    pub fn new(goal_count: usize, height: usize, width: usize, seed: u64) -> Result<Self, LearnedError> {
        Self::with_dims(goal_count, height, width, [16, 32, 64], 256, seed)
    }

    pub fn with_dims(
        goal_count: usize,
        height: usize,
        width: usize,
        channels: [usize; 3],
        hidden: usize,
        seed: u64,
    ) -> Result<Self, LearnedError> {
        assert!(goal_count >= 1 && hidden >= 1 && height >= 1 && width >= 1);
        let pooled = height.max(width) > 16;
        let (fh, fw) = if pooled {
            (height.div_ceil(2).div_ceil(2), width.div_ceil(2).div_ceil(2))
        } else {
            (height, width)
        };
        let flat = channels[2] * fh * fw;
        if flat > MAX_FRAME_FLAT {
            return Err(LearnedError::SpatialTooLarge { flattened: flat, max: MAX_FRAME_FLAT });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let stages = [
            ("conv1", STACK_CHANNELS, channels[0]),
            ("conv2", channels[0], channels[1]),
            ("conv3", channels[1], channels[2]),
        ];
        for (name, cin, cout) in stages {
            params.insert(
                format!("{name}.k"),
                he_uniform_init(&[cout, cin, 3, 3], cin * 9, &mut rng),
            );
            params.insert(format!("{name}.b"), Tensor::zeros(&[cout]));
        }
        params.insert("temporal.wx", he_uniform_init(&[flat, 4 * hidden], flat, &mut rng));
        params.insert("temporal.wh", he_uniform_init(&[hidden, 4 * hidden], hidden, &mut rng));
        params.insert("temporal.b", Tensor::zeros(&[4 * hidden]));
        params.insert("head.w", he_uniform_init(&[hidden, goal_count], hidden, &mut rng));
        params.insert("head.b", Tensor::zeros(&[goal_count]));
        Ok(SpatioTemporalNet { goal_count, height, width, channels, hidden, pooled, params })
    }

    pub fn goal_count(&self) -> usize {
        self.goal_count
    }

    pub fn spatial(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn channels(&self) -> [usize; 3] {
        self.channels
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn pooled(&self) -> bool {
        self.pooled
    }

    fn encode_frame(
        &self,
        params: &ParamSet,
        frame: &[f64],
    ) -> Result<(Vec<f64>, FrameCache), LearnedError> {
        let x = Tensor::from_vec(&[STACK_CHANNELS, self.height, self.width], frame.to_vec());
        let z1 = conv2d_forward(&x, params.get("conv1.k"), params.get("conv1.b"))?;
        let a1 = relu_forward(&z1);
        let (p1, arg1) = if self.pooled {
            maxpool2x2_forward(&a1)
        } else {
            (a1.clone(), Vec::new())
        };
        let z2 = conv2d_forward(&p1, params.get("conv2.k"), params.get("conv2.b"))?;
        let a2 = relu_forward(&z2);
        let (p2, arg2) = if self.pooled {
            maxpool2x2_forward(&a2)
        } else {
            (a2.clone(), Vec::new())
        };
        let z3 = conv2d_forward(&p2, params.get("conv3.k"), params.get("conv3.b"))?;
        let encoded = relu_forward(&z3).data().to_vec();
        Ok((encoded, FrameCache { x, z1, a1, p1, arg1, z2, a2, p2, arg2, z3 }))
    }

    fn run(
        &self,
        params: &ParamSet,
        inputs: &NetInputs,
        plan: &DropoutPlan,
    ) -> Result<(Vec<f64>, SpatialCache), LearnedError> {
        let stack: &ChannelStack = match inputs {
            NetInputs::Frames(stack) => stack,
            NetInputs::Sequence { .. } => {
                return Err(LearnedError::WrongInputs { kind: NetKind::Stdnn.id() })
            }
        };
        if stack.height != self.height || stack.width != self.width {
            return Err(LearnedError::WrongInputs { kind: NetKind::Stdnn.id() });
        }
        let mut encoded = Vec::with_capacity(stack.frames.len());
        let mut caches = Vec::with_capacity(stack.frames.len());
        for frame in &stack.frames {
            let (e, c) = self.encode_frame(params, frame)?;
            encoded.push(e);
            caches.push(c);
        }
        let temporal = lstm_forward(
            &encoded,
            params.get("temporal.wx"),
            params.get("temporal.wh"),
            params.get("temporal.b"),
        )?;
        let hidden = Tensor::from_vec(&[1, self.hidden], temporal.final_hidden().to_vec());
        let (dropped, mask) = dropout_forward(&hidden, plan.rate, plan.mode, &mut plan.rng());
        let logits = dense_forward(&dropped, params.get("head.w"), params.get("head.b"))?;
        Ok((logits.data().to_vec(), SpatialCache { frames: caches, temporal, dropped, mask }))
    }

    fn grads(&self, params: &ParamSet, cache: &SpatialCache, dlogits: &[f64]) -> Grads {
        let dy = Tensor::from_vec(&[1, self.goal_count], dlogits.to_vec());
        let (ddropped, dhw, dhb) = dense_backward(&cache.dropped, params.get("head.w"), &dy);
        let dhidden = dropout_backward(&ddropped, &cache.mask);
        let temporal_g = lstm_backward(
            params.get("temporal.wx"),
            params.get("temporal.wh"),
            &cache.temporal,
            dhidden.data(),
        );

        let mut grads = Grads::new();
        grads.add("temporal.wx", &temporal_g.dwx);
        grads.add("temporal.wh", &temporal_g.dwh);
        grads.add("temporal.b", &temporal_g.db);
        grads.add("head.w", &dhw);
        grads.add("head.b", &dhb);

        for (fc, dflat) in cache.frames.iter().zip(&temporal_g.dx) {
            let da3 = Tensor::from_vec(fc.z3.shape(), dflat.clone());
            let dz3 = relu_backward(&fc.z3, &da3);
            let (dp2, dk3, db3) = conv2d_backward(&fc.p2, params.get("conv3.k"), &dz3);
            let da2 = if self.pooled {
                maxpool2x2_backward(fc.a2.shape(), &fc.arg2, &dp2)
            } else {
                dp2
            };
            let dz2 = relu_backward(&fc.z2, &da2);
            let (dp1, dk2, db2) = conv2d_backward(&fc.p1, params.get("conv2.k"), &dz2);
            let da1 = if self.pooled {
                maxpool2x2_backward(fc.a1.shape(), &fc.arg1, &dp1)
            } else {
                dp1
            };
            let dz1 = relu_backward(&fc.z1, &da1);
            let (_, dk1, db1) = conv2d_backward(&fc.x, params.get("conv1.k"), &dz1);
            grads.add("conv3.k", &dk3);
            grads.add("conv3.b", &db3);
            grads.add("conv2.k", &dk2);
            grads.add("conv2.b", &db2);
            grads.add("conv1.k", &dk1);
            grads.add("conv1.b", &db1);
        }
        grads
    }
}

/// Any recognizer network, unified for training and evaluation.
#[derive(Debug, Clone)]
pub enum Net {
    DualEncoder(DualEncoderNet),
    Baseline(BaselineNet),
    SpatioTemporal(SpatioTemporalNet),
}

impl Net {
    pub fn kind(&self) -> NetKind {
        match self {
            Net::DualEncoder(n) => n.kind,
            Net::Baseline(_) => NetKind::LstmObs,
            Net::SpatioTemporal(_) => NetKind::Stdnn,
        }
    }

    pub fn goal_count(&self) -> usize {
        match self {
            Net::DualEncoder(n) => n.goal_count(),
            Net::Baseline(n) => n.goal_count(),
            Net::SpatioTemporal(n) => n.goal_count(),
        }
    }

    pub fn params(&self) -> &ParamSet {
        match self {
            Net::DualEncoder(n) => &n.params,
            Net::Baseline(n) => &n.params,
            Net::SpatioTemporal(n) => &n.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        match self {
            Net::DualEncoder(n) => &mut n.params,
            Net::Baseline(n) => &mut n.params,
            Net::SpatioTemporal(n) => &mut n.params,
        }
    }

    /// Logits under explicit parameters, so probes and training share one
    /// code path.
    pub fn logits_with(
        &self,
        params: &ParamSet,
        inputs: &NetInputs,
        plan: &DropoutPlan,
    ) -> Result<Vec<f64>, LearnedError> {
        match self {
            Net::DualEncoder(n) => Ok(n.run(params, inputs, plan)?.0),
            Net::Baseline(n) => Ok(n.run(params, inputs, plan)?.0),
            Net::SpatioTemporal(n) => Ok(n.run(params, inputs, plan)?.0),
        }
    }

    /// Cross-entropy loss and parameter gradients for one example under
    /// explicit parameters.
    pub fn loss_and_grads_with(
        &self,
        params: &ParamSet,
        inputs: &NetInputs,
        target: usize,
        plan: &DropoutPlan,
    ) -> Result<(f64, Grads), LearnedError> {
        match self {
            Net::DualEncoder(n) => {
                let (logits, cache) = n.run(params, inputs, plan)?;
                let (_, loss, dlogits) = softmax_xent(&logits, target)?;
                Ok((loss, n.grads(params, &cache, &dlogits)))
            }
            Net::Baseline(n) => {
                let (logits, cache) = n.run(params, inputs, plan)?;
                let (_, loss, dlogits) = softmax_xent(&logits, target)?;
                Ok((loss, n.grads(params, &cache, &dlogits)))
            }
            Net::SpatioTemporal(n) => {
                let (logits, cache) = n.run(params, inputs, plan)?;
                let (_, loss, dlogits) = softmax_xent(&logits, target)?;
                Ok((loss, n.grads(params, &cache, &dlogits)))
            }
        }
    }

    pub fn loss(&self, inputs: &NetInputs, target: usize) -> Result<f64, LearnedError> {
        let logits = self.logits_with(self.params(), inputs, &DropoutPlan::eval())?;
        Ok(softmax_xent(&logits, target)?.1)
    }
}

/// Evaluate the network on one example and return its goal posterior.
pub fn forward(net: &Net, inputs: &NetInputs) -> Result<Posterior, LearnedError> {
    let logits = net.logits_with(net.params(), inputs, &DropoutPlan::eval())?;
    let (probs, _, _) = softmax_xent(&logits, 0)?;
    Ok(Posterior::from_scores(probs))
}

/// Predicted goal index: the posterior argmax, with exact ties resolved by
/// a uniform draw seeded from `seed`.
pub fn predict(net: &Net, inputs: &NetInputs, seed: u64) -> Result<usize, LearnedError> {
    let posterior = forward(net, inputs)?;
    Ok(draw_max(&posterior, seed))
}

/// Uniform seeded draw among the exact maxima of a posterior.
pub fn draw_max(posterior: &Posterior, seed: u64) -> usize {
    let maxima = posterior.max_indices();
    if maxima.len() == 1 {
        return maxima[0];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    maxima[rng.random_range(0..maxima.len())]
}
