"""
WSGI config for edgeProject project.

Solo se usa para exponer el admin de corridas (`manage.py runserver`).
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'edgeProject.settings')

application = get_wsgi_application()
