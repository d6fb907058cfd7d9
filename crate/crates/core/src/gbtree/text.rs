//! Plain-text model format.
//!
//! ```text
//! gbtree-model v1
//! n_estimators=2
//! learning_rate=0.1
//! ... (remaining params, one per line)
//! n_features=3
//! base_score=5
//! tree 0 nodes=3
//! node_id,kind,feature,threshold,default_left,weight,left_id,right_id
//! 0,split,1,2.5,true,,1,2
//! 1,leaf,,,,-5,,
//! 2,leaf,,,,5,,
//! ```
//!
//! Floats are written in shortest round-trip form, so parsing restores the
//! model exactly.

use super::{GbtError, GbtModel, GbtParams, RegressionTree, TreeNode};

const MAGIC: &str = "gbtree-model v1";
const NODE_HEADER: &str = "node_id,kind,feature,threshold,default_left,weight,left_id,right_id";

impl GbtModel {
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        s.push_str(MAGIC);
        s.push('\n');
        for (k, v) in [
            ("n_estimators", p.n_estimators.to_string()),
            ("learning_rate", p.learning_rate.to_string()),
            ("max_depth", p.max_depth.to_string()),
            ("subsample", p.subsample.to_string()),
            ("reg_lambda", p.reg_lambda.to_string()),
            ("reg_alpha", p.reg_alpha.to_string()),
            ("gamma", p.gamma.to_string()),
            ("min_child_weight", p.min_child_weight.to_string()),
            ("seed", p.seed.to_string()),
            ("n_features", self.n_features.to_string()),
            ("base_score", self.base_score.to_string()),
        ] {
            s.push_str(&format!("{k}={v}\n"));
        }
        for (t, tree) in self.trees.iter().enumerate() {
            s.push_str(&format!("tree {t} nodes={}\n{NODE_HEADER}\n", tree.nodes.len()));
            for (id, node) in tree.nodes.iter().enumerate() {
                match node {
                    TreeNode::Split {
                        feature,
                        threshold,
                        default_left,
                        left,
                        right,
                    } => s.push_str(&format!(
                        "{id},split,{feature},{threshold},{default_left},,{left},{right}\n"
                    )),
                    TreeNode::Leaf { weight } => s.push_str(&format!("{id},leaf,,,,{weight},,\n")),
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<GbtModel, GbtError> {
        let err = |m: String| GbtError::Parse(m);
        let mut lines = text.lines().enumerate().peekable();
        match lines.next() {
            Some((_, l)) if l.trim() == MAGIC => {}
            _ => return Err(err("missing header line".into())),
        }
        let mut kv = std::collections::HashMap::new();
        while let Some((_, line)) = lines.peek() {
            if line.starts_with("tree ") {
                break;
            }
            let (i, line) = lines.next().unwrap();
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("line {}: expected key=value", i + 1)))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        fn get<T: std::str::FromStr>(
            kv: &std::collections::HashMap<String, String>,
            k: &str,
        ) -> Result<T, GbtError> {
            kv.get(k)
                .ok_or_else(|| GbtError::Parse(format!("missing {k}")))?
                .parse()
                .map_err(|_| GbtError::Parse(format!("bad value for {k}")))
        }
        let params = GbtParams {
            n_estimators: get(&kv, "n_estimators")?,
            learning_rate: get(&kv, "learning_rate")?,
            max_depth: get(&kv, "max_depth")?,
            subsample: get(&kv, "subsample")?,
            reg_lambda: get(&kv, "reg_lambda")?,
            reg_alpha: get(&kv, "reg_alpha")?,
            gamma: get(&kv, "gamma")?,
            min_child_weight: get(&kv, "min_child_weight")?,
            seed: get(&kv, "seed")?,
        };
        let n_features: usize = get(&kv, "n_features")?;
        let base_score: f64 = get(&kv, "base_score")?;

        let mut trees = Vec::new();
        while let Some((i, line)) = lines.next() {
            let rest = line
                .strip_prefix("tree ")
                .ok_or_else(|| err(format!("line {}: expected tree header", i + 1)))?;
            let n_nodes: usize = rest
                .split_once("nodes=")
                .and_then(|(_, n)| n.trim().parse().ok())
                .ok_or_else(|| err(format!("line {}: bad tree header", i + 1)))?;
            match lines.next() {
                Some((_, h)) if h.trim() == NODE_HEADER => {}
                _ => return Err(err(format!("line {}: missing node header", i + 2))),
            }
            let mut nodes = Vec::with_capacity(n_nodes);
            for expected_id in 0..n_nodes {
                let (i, line) = lines
                    .next()
                    .ok_or_else(|| err("truncated tree".into()))?;
                let f: Vec<&str> = line.split(',').collect();
                let bad = || err(format!("line {}: malformed node", i + 1));
                if f.len() != 8 || f[0].parse::<usize>().ok() != Some(expected_id) {
                    return Err(bad());
                }
                let node = match f[1] {
                    "leaf" => TreeNode::Leaf {
                        weight: f[5].parse().map_err(|_| bad())?,
                    },
                    "split" => {
                        let feature: usize = f[2].parse().map_err(|_| bad())?;
                        let left: usize = f[6].parse().map_err(|_| bad())?;
                        let right: usize = f[7].parse().map_err(|_| bad())?;
                        if feature >= n_features
                            || left >= n_nodes
                            || right >= n_nodes
                            || left <= expected_id
                            || right <= expected_id
                        {
                            return Err(bad());
                        }
                        TreeNode::Split {
                            feature,
                            threshold: f[3].parse().map_err(|_| bad())?,
                            default_left: f[4].parse().map_err(|_| bad())?,
                            left,
                            right,
                        }
                    }
                    _ => return Err(bad()),
                };
                nodes.push(node);
            }
            trees.push(RegressionTree { nodes });
        }
        Ok(GbtModel {
            base_score,
            n_features,
            trees,
            params,
        })
    }
}
