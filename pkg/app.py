import os
import logging

from flask import Flask, jsonify
from dotenv import load_dotenv

from utils import CheegerError

# ---------------- Environment ----------------
load_dotenv()
logging.basicConfig(level=os.environ.get('CHEEGER_LOG_LEVEL', 'INFO').upper())

# ---------------- Flask App Setup ----------------
app = Flask(__name__)
app.json.sort_keys = True
app.config['MAX_SCAN_CELLS'] = int(os.environ.get('CHEEGER_MAX_SCAN_CELLS', '10000'))


@app.errorhandler(CheegerError)
def handle_cheeger_error(e):
    logging.warning(f"Rejected request: {e}")
    return jsonify({'error': str(e)}), 400


@app.errorhandler(ValueError)
def handle_value_error(e):
    return jsonify({'error': str(e)}), 400


@app.route('/health')
def health():
    return jsonify({'status': 'ok'})


# ---------------- Import additional routes ----------------
import routes  # noqa: E402,F401
