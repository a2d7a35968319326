"""
URL configuration for edgeProject project.

El proyecto no expone vistas propias: el único punto web es el admin,
donde se inspeccionan las corridas registradas (TblExperimentRun).
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
