//! The four-identity cloud scenario: two roles with disjoint privileges on one instance.

use serde_json::{json, Value};

use crate::event::TypeConfig;

pub const IDS: [&str; 4] = [
    "AttrService-InstanceRole-BTDN",
    "AttrService-DataRole-QRIU",
    "ModelService-DataRole-AUIB",
    "ModelService-InstanceRole-ZXWI",
];

pub const INSTANCE_OPS: [&str; 3] = ["CreateInstance", "DeleteInstance", "GetInstanceStatus"];
pub const DATA_OPS: [&str; 3] = ["StartInstance", "StopInstance", "GetInstanceStatus"];

pub fn event(actor: &str, op: &str) -> Value {
    json!({
        "actor": {"id": actor},
        "api": {
            "operation": op,
            "request.data": {"instanceID": "i-12345", "asnDesc": "AMAZON-AES"}
        }
    })
}

pub fn type_config_json() -> Value {
    json!({
        "types": {
            "actor.id": "Role",
            "api.operation": "EventName",
            "api.request.data.instanceID": "Instance",
            "api.request.data.asnDesc": "ASN"
        },
        "closed_types": ["EventName"]
    })
}

pub fn type_config() -> TypeConfig {
    TypeConfig::from_json(&type_config_json()).expect("static config")
}

/// The 12 training events.
pub fn training() -> Vec<Value> {
    let mut out = Vec::new();
    for id in IDS {
        let ops = if id.contains("InstanceRole") { INSTANCE_OPS } else { DATA_OPS };
        for op in ops {
            out.push(event(id, op));
        }
    }
    out
}

fn labeled(mut v: Value, label: &str) -> Value {
    v["_label"] = json!(label);
    v
}

/// Every training event labeled normal plus privilege violations labeled anomalous.
pub fn test_set() -> Vec<Value> {
    let mut out: Vec<Value> = training().into_iter().map(|e| labeled(e, "normal")).collect();
    for id in IDS {
        let foreign = if id.contains("InstanceRole") { DATA_OPS } else { INSTANCE_OPS };
        for op in foreign.iter().filter(|o| **o != "GetInstanceStatus") {
            out.push(labeled(event(id, op), "anomaly"));
        }
    }
    out
}
